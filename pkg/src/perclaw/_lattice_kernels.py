"""Cluster labeling kernels for hypercubic site percolation.

Primary path: union-find (union by size, path compression) compiled with
numba. Fallback path: scipy.ndimage connected-component labeling. Both
canonicalize labels to the smallest flat site index of each cluster, so
their outputs are identical.
"""

import numpy as np
from scipy import ndimage

from ._accel import njit


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:  # path compression
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def label_union_find(occ, shape):
    """Canonical labels for occupied sites of a flat occupancy array.

    occ: bool/uint8 flat array of length prod(shape); shape: int64 array.
    Returns int32 labels (min site index per cluster, -1 when unoccupied).
    """
    n = occ.size
    ndim = shape.size
    strides = np.empty(ndim, np.int64)
    strides[ndim - 1] = 1
    for d in range(ndim - 2, -1, -1):
        strides[d] = strides[d + 1] * shape[d + 1]
    parent = np.empty(n, np.int32)
    size = np.ones(n, np.int32)
    for i in range(n):
        parent[i] = i
    for i in range(n):
        if not occ[i]:
            continue
        for d in range(ndim):
            # forward neighbor along axis d, when inside the lattice
            coord = (i // strides[d]) % shape[d]
            if coord + 1 >= shape[d]:
                continue
            j = i + strides[d]
            if not occ[j]:
                continue
            ri = _find(parent, i)
            rj = _find(parent, j)
            if ri == rj:
                continue
            if size[ri] < size[rj]:
                ri, rj = rj, ri
            parent[rj] = ri
            size[ri] += size[rj]
    # canonicalize: label = smallest member index
    label = np.full(n, -1, np.int32)
    for i in range(n):
        if occ[i]:
            r = _find(parent, i)
            if label[r] == -1 or label[r] > i:
                label[r] = i
    for i in range(n):
        if occ[i]:
            label[i] = label[_find(parent, i)]
    return label


def label_ndimage(occ, shape):
    """scipy.ndimage fallback with the same canonical labeling."""
    grid = occ.reshape(tuple(shape)).astype(bool)
    structure = ndimage.generate_binary_structure(len(shape), 1)
    raw, n = ndimage.label(grid, structure=structure)
    raw = raw.ravel()
    label = np.full(occ.size, -1, np.int32)
    if n:
        flat_idx = np.arange(occ.size)
        min_idx = ndimage.minimum(flat_idx, labels=raw, index=np.arange(1, n + 1))
        occupied = raw > 0
        label[occupied] = min_idx.astype(np.int32)[raw[occupied] - 1]
    return label
