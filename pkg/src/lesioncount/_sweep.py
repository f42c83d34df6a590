"""JIT-compiled union-find sweep used by the filtration module.

The sweep processes foreground vertices in filtration order (descending
probability, ties by ascending linear index) and maintains two union-find
forests over compact vertex positions:

* the *merge* forest, where a join between two existing components is
  performed only when the younger component's persistence at the current
  level is <= theta (the elder root always survives a union);
* the *support* forest, which unions unconditionally and whose final roots
  identify the connected components of the foreground support.

Ranks double as the elder order: a root with smaller filtration rank is the
older component, so all birth comparisons reduce to integer comparisons.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def filtration_sweep(fg_lin, fg_val, order, pos_of_lin, nx, ny, nz, theta):
    """Run the thresholded merge sweep.

    Returns (parent, n_roots, dot_birth, dot_death, dot_lin, n_dots,
    essential_pos, n_essentials).  ``parent`` is fully path-compressed;
    ``essential_pos`` lists support-forest roots in filtration order.
    The dot arrays record one entry per join attempt between two components
    that both existed before the current vertex was added, whether or not
    the merge was performed.
    """
    n = fg_lin.size
    rank = np.empty(n, np.int64)
    for r in range(n):
        rank[order[r]] = r
    parent = np.arange(n)
    sup_parent = np.arange(n)

    max_dots = 3 * n + 1
    dot_birth = np.empty(max_dots, np.float64)
    dot_death = np.empty(max_dots, np.float64)
    dot_lin = np.empty(max_dots, np.int64)
    n_dots = 0

    nxny = nx * ny
    cand = np.empty(6, np.int64)

    for r in range(n):
        v = order[r]
        t = fg_val[v]
        lin = fg_lin[v]
        x = lin % nx
        y = (lin // nx) % ny
        z = lin // nxny

        # Gather already-processed 6-neighbors.
        m = 0
        if x > 0:
            q = pos_of_lin[lin - 1]
            if q >= 0 and rank[q] < r:
                cand[m] = q
                m += 1
        if x < nx - 1:
            q = pos_of_lin[lin + 1]
            if q >= 0 and rank[q] < r:
                cand[m] = q
                m += 1
        if y > 0:
            q = pos_of_lin[lin - nx]
            if q >= 0 and rank[q] < r:
                cand[m] = q
                m += 1
        if y < ny - 1:
            q = pos_of_lin[lin + nx]
            if q >= 0 and rank[q] < r:
                cand[m] = q
                m += 1
        if z > 0:
            q = pos_of_lin[lin - nxny]
            if q >= 0 and rank[q] < r:
                cand[m] = q
                m += 1
        if z < nz - 1:
            q = pos_of_lin[lin + nxny]
            if q >= 0 and rank[q] < r:
                cand[m] = q
                m += 1

        # Fixed edge order within the star: earliest-processed neighbor first.
        for a in range(1, m):
            key = cand[a]
            kr = rank[key]
            b = a - 1
            while b >= 0 and rank[cand[b]] > kr:
                cand[b + 1] = cand[b]
                b -= 1
            cand[b + 1] = key

        for k in range(m):
            u = cand[k]

            sru = _find(sup_parent, u)
            srv = _find(sup_parent, v)
            if sru != srv:
                if rank[sru] < rank[srv]:
                    sup_parent[srv] = sru
                else:
                    sup_parent[sru] = srv

            ru = _find(parent, u)
            rv = _find(parent, v)
            if ru == rv:
                continue
            if rv == v:
                # v is still a bare singleton born at the current level; it
                # is always the younger side with zero persistence, so it is
                # absorbed silently (no diagram entry).
                parent[v] = ru
                continue
            if rank[ru] > rank[rv]:
                young, old = ru, rv
            else:
                young, old = rv, ru
            pers = fg_val[young] - t
            dot_birth[n_dots] = fg_val[young]
            dot_death[n_dots] = t
            dot_lin[n_dots] = fg_lin[young]
            n_dots += 1
            if pers <= theta:
                parent[young] = old

    # Fully compress both forests and collect outputs.
    n_roots = 0
    for i in range(n):
        _find(parent, i)
        _find(sup_parent, i)
        if parent[i] == i:
            n_roots += 1

    essential_pos = np.empty(n, np.int64)
    n_ess = 0
    for r in range(n):
        i = order[r]
        if sup_parent[i] == i:
            essential_pos[n_ess] = i
            n_ess += 1

    return parent, n_roots, dot_birth, dot_death, dot_lin, n_dots, essential_pos, n_ess
