"""Growth kernels for critical branching-tree clusters.

Two implementations of the same breadth-first growth: a sequential numba
kernel and a level-vectorized numpy fallback. Both consume identical draws
(child count of site i = count-stream uniform i inverted through a binomial
CDF table; value of site j = value-stream normal j), so cluster structure is
bit-identical across paths and values agree to the last ulp.
"""

import numpy as np

from ._accel import njit
from .rng import normal_at, normal_block, table_sample, uniform_at, uniform_block

STATUS_OK = 0
STATUS_TOO_LARGE = 1


@njit(cache=True)
def _enlarged(arr, new_cap):
    out = np.empty(new_cap, arr.dtype)
    out[: arr.size] = arr
    return out


@njit(cache=True)
def grow_tree_jit(cstate, vstate, cdf_root, cdf_rest, walk_std, max_size):
    """Grow one cluster; returns (parent, depth, value, size, status).

    Arrays are over-allocated buffers; only [:size] is meaningful. Growth
    aborts (STATUS_TOO_LARGE) as soon as adding a site's children would
    push the size over max_size.
    """
    cap = 1024
    parent = np.empty(cap, np.int32)
    depth = np.empty(cap, np.int32)
    value = np.empty(cap, np.float64)
    parent[0] = -1
    depth[0] = 0
    value[0] = walk_std * normal_at(vstate, 0)
    size = 1
    lo = 0
    hi = 1
    while hi > lo:
        for i in range(lo, hi):
            u = uniform_at(cstate, i)
            if i == 0:
                k = table_sample(cdf_root, u)
            else:
                k = table_sample(cdf_rest, u)
            if k == 0:
                continue
            if size + k > max_size:
                return parent, depth, value, size, STATUS_TOO_LARGE
            if size + k > cap:
                new_cap = cap
                while size + k > new_cap:
                    new_cap *= 2
                if new_cap > max_size:
                    new_cap = max_size
                parent = _enlarged(parent, new_cap)
                depth = _enlarged(depth, new_cap)
                value = _enlarged(value, new_cap)
                cap = new_cap
            d = depth[i] + 1
            vi = value[i]
            for _ in range(k):
                parent[size] = i
                depth[size] = d
                value[size] = vi + walk_std * normal_at(vstate, size)
                size += 1
        lo = hi
        hi = size
    return parent, depth, value, size, STATUS_OK


@njit(cache=True)
def grow_size_jit(cstate, cdf_root, cdf_rest, max_size):
    """Size-only growth; returns (size, status, nonroot_draws, nonroot_sum).

    Consumes the count stream exactly like grow_tree_jit, so sizes match
    full growth draw-for-draw. The offspring tallies cover every non-root
    site whose child count was drawn, including the draw that aborts.
    """
    size = 1
    lo = 0
    hi = 1
    nonroot_draws = 0
    nonroot_sum = 0
    while hi > lo:
        for i in range(lo, hi):
            u = uniform_at(cstate, i)
            if i == 0:
                k = table_sample(cdf_root, u)
            else:
                k = table_sample(cdf_rest, u)
                nonroot_draws += 1
                nonroot_sum += k
            if size + k > max_size:
                return size, STATUS_TOO_LARGE, nonroot_draws, nonroot_sum
            size += k
        lo = hi
        hi = size
    return size, STATUS_OK, nonroot_draws, nonroot_sum


@njit(cache=True)
def sample_sizes_jit(states, cdf_root, cdf_rest, max_size):
    """Batched grow_size_jit over per-attempt stream states."""
    n = len(states)
    sizes = np.empty(n, np.int64)
    statuses = np.empty(n, np.int64)
    draws = 0
    total = 0
    for a in range(n):
        sz, st, d, s = grow_size_jit(states[a], cdf_root, cdf_rest, max_size)
        sizes[a] = sz
        statuses[a] = st
        draws += d
        total += s
    return sizes, statuses, draws, total


# --- pure-numpy fallbacks --------------------------------------------------

def _abort_index(size, ends, max_size):
    """Index of the first site whose children would exceed max_size, or -1."""
    if ends[-1] <= max_size:
        return -1
    return int(np.searchsorted(ends, max_size, side="right"))


def grow_tree_numpy(cstate, vstate, cdf_root, cdf_rest, walk_std, max_size):
    cap = 1024
    parent = np.empty(cap, np.int32)
    depth = np.empty(cap, np.int32)
    value = np.empty(cap, np.float64)
    parent[0] = -1
    depth[0] = 0
    value[0] = walk_std * normal_block(vstate, 0, 1)[0]
    size = 1
    lo, hi = 0, 1
    level = 0
    while hi > lo:
        u = uniform_block(cstate, lo, hi - lo)
        cdf = cdf_root if lo == 0 else cdf_rest
        counts = np.searchsorted(cdf, u, side="left")
        ends = size + np.cumsum(counts)
        stop = _abort_index(size, ends, max_size)
        if stop >= 0:
            abort_size = size if stop == 0 else int(ends[stop - 1])
            return parent, depth, value, abort_size, STATUS_TOO_LARGE
        new_size = int(ends[-1])
        if new_size > cap:
            while new_size > cap:
                cap *= 2
            cap = min(cap, max_size)
            parent = np.concatenate([parent, np.empty(cap - parent.size, np.int32)])
            depth = np.concatenate([depth, np.empty(cap - depth.size, np.int32)])
            value = np.concatenate([value, np.empty(cap - value.size, np.float64)])
        n_children = new_size - size
        level += 1
        if n_children:
            parents = np.repeat(np.arange(lo, hi, dtype=np.int32), counts)
            parent[size:new_size] = parents
            depth[size:new_size] = level
            noise = normal_block(vstate, size, n_children)
            value[size:new_size] = value[parents] + walk_std * noise
        lo, hi = hi, new_size
        size = new_size
    return parent, depth, value, size, STATUS_OK


def grow_size_numpy(cstate, cdf_root, cdf_rest, max_size):
    size = 1
    lo, hi = 0, 1
    nonroot_draws = 0
    nonroot_sum = 0
    while hi > lo:
        u = uniform_block(cstate, lo, hi - lo)
        cdf = cdf_root if lo == 0 else cdf_rest
        counts = np.searchsorted(cdf, u, side="left")
        ends = size + np.cumsum(counts)
        stop = _abort_index(size, ends, max_size)
        if stop >= 0:
            # tally draws up to and including the aborting site
            if lo > 0:
                nonroot_draws += stop + 1
                nonroot_sum += int(counts[: stop + 1].sum())
            abort_size = size if stop == 0 else int(ends[stop - 1])
            return abort_size, STATUS_TOO_LARGE, nonroot_draws, nonroot_sum
        if lo > 0:
            nonroot_draws += hi - lo
            nonroot_sum += int(counts.sum())
        size = int(ends[-1])
        lo, hi = hi, size
    return size, STATUS_OK, nonroot_draws, nonroot_sum


def sample_sizes_numpy(states, cdf_root, cdf_rest, max_size):
    n = len(states)
    sizes = np.empty(n, np.int64)
    statuses = np.empty(n, np.int64)
    draws = 0
    total = 0
    for a in range(n):
        sz, st, d, s = grow_size_numpy(states[a], cdf_root, cdf_rest, max_size)
        sizes[a] = sz
        statuses[a] = st
        draws += d
        total += s
    return sizes, statuses, draws, total
