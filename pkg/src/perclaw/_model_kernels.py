"""Nearest-neighbor evaluation kernels on cluster trees.

Distances are reconstructed from each site's cached (parent, depth): lift
the deeper endpoint to equal depth, then walk both up in lockstep. The
evaluation kernel brute-forces over the training sites in ascending index
order (ties resolve to the smallest index) with two prunes that leave the
result unchanged: a |depth(u) - depth(t)| lower bound, and aborting a walk
once it cannot beat the incumbent distance.
"""

import numpy as np

from ._accel import njit

_HUGE = 1 << 60


@njit(cache=True)
def tree_dist_bounded(parent, depth, u, v, bound):
    """Path length between u and v, or any value >= bound once the walk
    proves the distance cannot be < bound."""
    du = depth[u]
    dv = depth[v]
    d = 0
    while du > dv:
        u = parent[u]
        du -= 1
        d += 1
        if d >= bound:
            return d
    while dv > du:
        v = parent[v]
        dv -= 1
        d += 1
        if d >= bound:
            return d
    while u != v:
        u = parent[u]
        v = parent[v]
        d += 2
        if d >= bound:
            return d
    return d


@njit(cache=True)
def tree_dist_jit(parent, depth, u, v):
    return tree_dist_bounded(parent, depth, u, v, _HUGE)


@njit(cache=True)
def evaluate_cluster_jit(parent, depth, value, t_sites, t_depths, test, sqrt_s):
    """Sums of squared errors over test sites: (bayes, naive).

    Brute force over the training sites via tree distance, visited in
    order of |depth(u) - depth(t)| (two pointers over the depth-sorted
    training list). |depth difference| lower-bounds the tree distance, so
    the scan stops once no remaining candidate can reach the incumbent,
    and walks abort once they exceed it. Ties resolve to the smallest
    training-site index regardless of visit order. With no training sites
    both estimators predict the prior mean 0.
    """
    sse_b = 0.0
    sse_n = 0.0
    n_train = t_sites.size
    for ti in range(test.size):
        u = test[ti]
        yu = value[u]
        if n_train == 0:
            sse_b += yu * yu
            sse_n += yu * yu
            continue
        best_d = _HUGE
        best_t = _HUGE
        du = depth[u]
        right = np.searchsorted(t_depths, du)
        left = right - 1
        while True:
            ldiff = du - t_depths[left] if left >= 0 else _HUGE
            rdiff = t_depths[right] - du if right < n_train else _HUGE
            lb = ldiff if ldiff <= rdiff else rdiff
            if lb > best_d:
                break
            if ldiff <= rdiff:
                t = t_sites[left]
                left -= 1
            else:
                t = t_sites[right]
                right += 1
            d = tree_dist_bounded(parent, depth, u, t, best_d + 1)
            if d < best_d or (d == best_d and t < best_t):
                best_d = d
                best_t = t
        y_nn = value[best_t]
        y_b = y_nn / (1.0 + best_d / sqrt_s)
        e_b = yu - y_b
        e_n = yu - y_nn
        sse_b += e_b * e_b
        sse_n += e_n * e_n
    return sse_b, sse_n


# --- pure-numpy fallbacks --------------------------------------------------

def tree_dist_numpy(parent, depth, u, v):
    du = int(depth[u])
    dv = int(depth[v])
    d = 0
    while du > dv:
        u = parent[u]
        du -= 1
        d += 1
    while dv > du:
        v = parent[v]
        dv -= 1
        d += 1
    while u != v:
        u = parent[u]
        v = parent[v]
        d += 2
    return d


def distances_to_many(parent, depth, u, targets):
    """Vector of path lengths from u to each target site."""
    a = np.full(targets.size, u, dtype=np.int64)
    b = targets.astype(np.int64).copy()
    da = depth[a].astype(np.int64)
    db = depth[b].astype(np.int64)
    dist = np.zeros(targets.size, np.int64)
    while True:
        ma = da > db
        mb = db > da
        if not (ma.any() or mb.any()):
            break
        if ma.any():
            a[ma] = parent[a[ma]]
            da[ma] -= 1
            dist[ma] += 1
        if mb.any():
            b[mb] = parent[b[mb]]
            db[mb] -= 1
            dist[mb] += 1
    ne = a != b
    while ne.any():
        a[ne] = parent[a[ne]]
        b[ne] = parent[b[ne]]
        dist[ne] += 2
        ne = a != b
    return dist


def evaluate_cluster_numpy(parent, depth, value, train, test, sqrt_s):
    sse_b = 0.0
    sse_n = 0.0
    for u in test:
        yu = value[u]
        if train.size == 0:
            sse_b += yu * yu
            sse_n += yu * yu
            continue
        dist = distances_to_many(parent, depth, int(u), train)
        j = int(np.argmin(dist))  # first minimum: smallest index (sorted)
        y_nn = value[train[j]]
        y_b = y_nn / (1.0 + dist[j] / sqrt_s)
        sse_b += (yu - y_b) ** 2
        sse_n += (yu - y_nn) ** 2
    return float(sse_b), float(sse_n)
