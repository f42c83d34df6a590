"""Topologically robust lesion counting for 3D probability maps.

Counts lesions in soft segmentation volumes by 0-dimensional persistent
homology over the superlevel-set filtration: components with persistence
at most theta are merged into their elder neighbors, so shallow noise
never inflates the count and the result barely depends on any single
probability cutoff.  Includes the clinical direct-thresholding baseline,
supervised and unsupervised threshold calibration on longitudinal data,
brute-force reference implementations, and a phantom generator.
"""

from .calibration import (
    CalibrationReport,
    CountTable,
    LongitudinalManifest,
    SubjectRecord,
    TimepointRecord,
    build_count_table,
    cross_validate,
    linear_fit,
    paired_ttest,
    supervised_select,
    unsupervised_select,
)
from .counting import (
    DEFAULT_TAU_GRID,
    DEFAULT_THETA_GRID,
    SweepResult,
    direct_threshold_count,
    make_grid,
    sweep_direct,
    sweep_persistence,
    sweep_to_csv,
    write_sweep_csv,
)
from .filtration import (
    ForegroundGraph,
    MergeForest,
    PersistenceCountResult,
    PersistenceDiagram,
    build_filtration_order,
    compute_persistence,
    count_from_diagram,
    diagram_to_csv,
    persistence_count,
    write_diagram_csv,
)
from .phantom import LongitudinalSpec, PhantomSpec, generate_longitudinal, generate_phantom
from .volume import (
    Volume,
    VolumeFormatError,
    VolumeHeaderInfo,
    crop_to_foreground,
    downsample,
    load_nifti,
    load_raw_json,
    load_volume,
    read_header,
    save_raw_json,
)

__version__ = "0.1.0"

__all__ = [
    "Volume",
    "VolumeHeaderInfo",
    "VolumeFormatError",
    "load_nifti",
    "load_raw_json",
    "load_volume",
    "save_raw_json",
    "read_header",
    "crop_to_foreground",
    "downsample",
    "ForegroundGraph",
    "MergeForest",
    "PersistenceDiagram",
    "PersistenceCountResult",
    "build_filtration_order",
    "persistence_count",
    "compute_persistence",
    "count_from_diagram",
    "diagram_to_csv",
    "write_diagram_csv",
    "SweepResult",
    "make_grid",
    "DEFAULT_TAU_GRID",
    "DEFAULT_THETA_GRID",
    "direct_threshold_count",
    "sweep_direct",
    "sweep_persistence",
    "sweep_to_csv",
    "write_sweep_csv",
    "TimepointRecord",
    "SubjectRecord",
    "LongitudinalManifest",
    "CountTable",
    "CalibrationReport",
    "build_count_table",
    "supervised_select",
    "linear_fit",
    "unsupervised_select",
    "cross_validate",
    "paired_ttest",
    "PhantomSpec",
    "LongitudinalSpec",
    "generate_phantom",
    "generate_longitudinal",
    "__version__",
]
