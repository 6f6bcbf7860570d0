"""Critical percolation clusters on a Bethe lattice.

Clusters grow breadth-first from a root: the root's child count is drawn
from Binomial(z, p), every later site's from Binomial(z-1, p) (one edge is
taken by the parent). At p = 1/(z-1) the non-root offspring mean is exactly
1, i.e. the branching process is critical. A branching random walk assigns
each site a value normally distributed about its parent's value; accepted
clusters are standardized to zero mean and unit population std.

Every cluster attempt owns the pair of streams (seed, GROWTH/VALUES,
attempt), so discarded attempts never shift the randomness of later ones.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _bethe_kernels as _k
from ._accel import NUMBA_ENABLED
from .rng import TAG_GROWTH, TAG_VALUES, binomial_cdf, derive_stream

DEGENERATE_STD = 1e-12

# Give up if this many consecutive attempts yield no accepted cluster
# (acceptance rate below ~1e-6 signals a pathological configuration).
STALL_ATTEMPTS = 1_000_000


class GenerationError(RuntimeError):
    """Raised when dataset generation cannot make progress."""


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters; z and p default to 2d and 1/(z-1)."""

    d: int = 100
    z: int | None = None
    p: float | None = None
    min_size: int = 300
    max_size: int = 30_000_000
    n_clusters: int = 316
    walk_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.z is None:
            object.__setattr__(self, "z", 2 * self.d)
        if self.p is None:
            object.__setattr__(self, "p", 1.0 / (self.z - 1))
        if self.z < 2:
            raise ValueError(f"z={self.z} must be >= 2")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")
        if self.min_size < 1:
            raise ValueError(f"min_size={self.min_size} must be >= 1")
        if self.max_size <= self.min_size:
            raise ValueError("max_size must exceed min_size")
        if self.n_clusters < 1:
            raise ValueError(f"n_clusters={self.n_clusters} must be >= 1")

    def cdf_tables(self):
        """(root, non-root) binomial CDF tables for child-count draws."""
        return binomial_cdf(self.z, self.p), binomial_cdf(self.z - 1, self.p)


@dataclass
class Cluster:
    """One percolation tree: parent links, root distances, target values."""

    parent: np.ndarray  # int32, -1 at the root
    depth: np.ndarray  # int32 hop count to root
    value: np.ndarray  # float64, standardized
    rank: int = 0  # 1-based rank by size within a dataset
    degenerate: bool = False  # zero-variance raw values (walk_std = 0)

    @property
    def size(self) -> int:
        return int(self.parent.size)


@dataclass(frozen=True)
class Rejection:
    """Marker for a discarded growth attempt."""

    reason: str  # "too_small" | "too_large"
    size: int


@dataclass
class Dataset:
    """Accepted clusters sorted by descending size, plus provenance."""

    clusters: list[Cluster]
    config: SimConfig
    seed: int
    n_rejected_small: int = 0
    n_rejected_large: int = 0
    sizes: np.ndarray = field(init=False)

    def __post_init__(self):
        self.sizes = np.array([c.size for c in self.clusters], dtype=np.int64)


def standardize(raw: np.ndarray) -> tuple[np.ndarray, bool]:
    """(raw - mean) / population std; zeros + degenerate flag if std ~ 0."""
    mean = raw.mean()
    std = raw.std()  # population (1/N) std
    if std < DEGENERATE_STD:
        return np.zeros_like(raw), True
    return (raw - mean) / std, False


def _grow(config: SimConfig, seed: int, attempt: int, tables):
    cstate = derive_stream(seed, TAG_GROWTH, attempt)
    vstate = derive_stream(seed, TAG_VALUES, attempt)
    cdf_root, cdf_rest = tables
    if NUMBA_ENABLED:
        return _k.grow_tree_jit(
            np.uint64(cstate), np.uint64(vstate), cdf_root, cdf_rest,
            config.walk_std, config.max_size,
        )
    return _k.grow_tree_numpy(
        cstate, vstate, cdf_root, cdf_rest, config.walk_std, config.max_size
    )


def generate_cluster(config: SimConfig, seed: int | None = None,
                     attempt: int = 0, _tables=None):
    """Grow one cluster attempt; returns a Cluster or a Rejection."""
    if seed is None:
        seed = config.seed
    tables = _tables if _tables is not None else config.cdf_tables()
    parent, depth, value, size, status = _grow(config, seed, attempt, tables)
    if status == _k.STATUS_TOO_LARGE or size > config.max_size:
        return Rejection("too_large", size)
    if size < config.min_size:
        return Rejection("too_small", size)
    std_value, degenerate = standardize(value[:size])
    return Cluster(
        parent=parent[:size].copy(),
        depth=depth[:size].copy(),
        value=std_value,
        degenerate=degenerate,
    )


def generate_dataset(config: SimConfig, seed: int | None = None) -> Dataset:
    """Accept clusters until n_clusters, sort by descending size, rank."""
    if seed is None:
        seed = config.seed
    tables = config.cdf_tables()
    accepted: list[Cluster] = []
    n_small = 0
    n_large = 0
    attempt = 0
    since_last = 0
    while len(accepted) < config.n_clusters:
        result = generate_cluster(config, seed, attempt, _tables=tables)
        attempt += 1
        if isinstance(result, Rejection):
            if result.reason == "too_small":
                n_small += 1
            else:
                n_large += 1
            since_last += 1
            if since_last >= STALL_ATTEMPTS:
                raise GenerationError(
                    f"no accepted cluster in {since_last} attempts "
                    f"(p={config.p}, min_size={config.min_size}); "
                    "configuration looks pathological"
                )
            continue
        since_last = 0
        accepted.append(result)
    # stable sort keeps generation order among equal sizes
    order = sorted(range(len(accepted)), key=lambda i: -accepted[i].size)
    clusters = [accepted[i] for i in order]
    for rank, cluster in enumerate(clusters, start=1):
        cluster.rank = rank
    return Dataset(clusters, config, seed, n_small, n_large)


def _attempt_states(seed: int, start: int, n: int) -> np.ndarray:
    return np.array(
        [derive_stream(seed, TAG_GROWTH, a) for a in range(start, start + n)],
        dtype=np.uint64,
    )


def sample_cluster_sizes(config: SimConfig, n_spawns: int,
                         seed: int | None = None):
    """Raw (pre-filter) sizes of n_spawns growth attempts.

    Aborted attempts are reported at the size they reached when the cap was
    hit, so the tail complementary CDF is exact below max_size. Returns
    (sizes, statuses).
    """
    if seed is None:
        seed = config.seed
    cdf_root, cdf_rest = config.cdf_tables()
    states = _attempt_states(seed, 0, n_spawns)
    fn = _k.sample_sizes_jit if NUMBA_ENABLED else _k.sample_sizes_numpy
    sizes, statuses, _, _ = fn(states, cdf_root, cdf_rest, config.max_size)
    return sizes, statuses


def mean_offspring_count(config: SimConfig, min_sites: int = 1_000_000,
                         seed: int | None = None) -> float:
    """Mean child count over >= min_sites non-root sites (pooled attempts)."""
    if seed is None:
        seed = config.seed
    cdf_root, cdf_rest = config.cdf_tables()
    fn = _k.sample_sizes_jit if NUMBA_ENABLED else _k.sample_sizes_numpy
    draws = 0
    total = 0
    attempt = 0
    batch = 256
    while draws < min_sites:
        states = _attempt_states(seed, attempt, batch)
        _, _, d, t = fn(states, cdf_root, cdf_rest, config.max_size)
        draws += d
        total += t
        attempt += batch
    return total / draws


def dataset_sizes(config: SimConfig, seed: int | None = None) -> np.ndarray:
    """Sizes (descending) of the accepted dataset, without growing values.

    Sizes depend only on the count streams, so this matches the sizes of
    generate_dataset(config, seed) exactly at a fraction of the cost.
    """
    if seed is None:
        seed = config.seed
    cdf_root, cdf_rest = config.cdf_tables()
    fn = _k.sample_sizes_jit if NUMBA_ENABLED else _k.sample_sizes_numpy
    accepted: list[int] = []
    attempt = 0
    since_last = 0
    batch = 512
    while len(accepted) < config.n_clusters:
        states = _attempt_states(seed, attempt, batch)
        sizes, statuses, _, _ = fn(states, cdf_root, cdf_rest, config.max_size)
        attempt += batch
        for sz, st in zip(sizes, statuses):
            if st == _k.STATUS_OK and config.min_size <= sz <= config.max_size:
                accepted.append(int(sz))
                since_last = 0
                if len(accepted) == config.n_clusters:
                    break
            else:
                since_last += 1
                if since_last >= STALL_ATTEMPTS:
                    raise GenerationError(
                        f"no accepted cluster in {since_last} attempts"
                    )
    return np.sort(np.array(accepted, dtype=np.int64))[::-1].copy()


def validate_tree(cluster: Cluster) -> None:
    """Structural checks: one root, no cycles, consistent depths."""
    parent = cluster.parent
    depth = cluster.depth
    roots = np.flatnonzero(parent < 0)
    if roots.size != 1 or roots[0] != 0:
        raise AssertionError(f"expected exactly one root at index 0, got {roots}")
    if depth[0] != 0:
        raise AssertionError("root depth must be 0")
    nonroot = np.arange(1, cluster.size)
    if nonroot.size:
        if np.any(parent[nonroot] >= nonroot):
            raise AssertionError("parents must precede children (BFS order)")
        if np.any(depth[nonroot] != depth[parent[nonroot]] + 1):
            raise AssertionError("depth[i] != depth[parent[i]] + 1")
