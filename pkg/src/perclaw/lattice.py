"""Hypercubic-lattice site percolation with cluster statistics.

Validates the cluster-size law n_s ~ s**-tau at criticality and produces
phase-transition (spanning probability) data. Sites are occupied
independently with probability p; clusters are maximal nearest-neighbor
connected components, labeled by their smallest flat site index.
"""

from dataclasses import dataclass

import numpy as np

from . import _lattice_kernels as _k
from ._accel import NUMBA_ENABLED
from .rng import TAG_LATTICE, Stream

MAX_SITES = 100_000_000


class InsufficientBinsError(ValueError):
    """Histogram window covers fewer than 5 non-empty log bins."""


@dataclass(frozen=True)
class LatticeConfig:
    dims: int
    L: int
    p: float
    seed: int = 0

    def __post_init__(self):
        if self.dims not in (2, 3):
            raise ValueError(f"dims={self.dims}; only 2 and 3 are supported")
        if self.L < 2:
            raise ValueError(f"L={self.L} must be >= 2")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")

    @property
    def n_sites(self) -> int:
        return self.L**self.dims


@dataclass
class ClusterStats:
    """Cluster decomposition summary for one occupancy realization."""

    cluster_sizes: np.ndarray  # one entry per cluster
    n_sites: int
    n_occupied: int
    largest_size: int
    spans: bool  # largest cluster touches two opposite faces

    def n_s(self) -> tuple[np.ndarray, np.ndarray]:
        """(s, n_s): distinct cluster sizes and clusters-per-site counts."""
        if self.cluster_sizes.size == 0:
            return np.empty(0, np.int64), np.empty(0, np.float64)
        s, counts = np.unique(self.cluster_sizes, return_counts=True)
        return s, counts / self.n_sites


def _occupancy(config: LatticeConfig, trial: int) -> np.ndarray:
    """Occupancy from uniforms keyed by (seed, trial) only, not p, so
    sweeps over p share common random numbers."""
    stream = Stream.from_path(config.seed, TAG_LATTICE, trial)
    return stream.uniform(config.n_sites) < config.p


def _label(occ: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    shape_arr = np.asarray(shape, dtype=np.int64)
    if NUMBA_ENABLED:
        return _k.label_union_find(occ.astype(np.uint8), shape_arr)
    return _k.label_ndimage(occ, shape_arr)


def _face_label_sets(labels: np.ndarray, axis: int):
    lo = np.take(labels, 0, axis=axis).ravel()
    hi = np.take(labels, -1, axis=axis).ravel()
    return np.unique(lo[lo >= 0]), np.unique(hi[hi >= 0])


def _spanning_labels(labels: np.ndarray) -> np.ndarray:
    """Labels of clusters touching two opposite faces along any axis."""
    out = []
    for axis in range(labels.ndim):
        lo, hi = _face_label_sets(labels, axis)
        out.append(np.intersect1d(lo, hi, assume_unique=True))
    return np.unique(np.concatenate(out)) if out else np.empty(0, np.int32)


def occupy_and_label(config: LatticeConfig, trial: int = 0):
    """One realization: returns (labels, ClusterStats).

    labels is shaped (L,)*dims, int32, holding each occupied site's cluster
    label (the cluster's smallest flat index) and -1 for unoccupied sites.
    """
    if config.n_sites > MAX_SITES:
        raise ValueError(
            f"lattice has {config.n_sites} sites, above the {MAX_SITES} cap"
        )
    shape = (config.L,) * config.dims
    occ = _occupancy(config, trial)
    flat = _label(occ, shape)
    labels = flat.reshape(shape)
    if np.any(occ):
        roots, sizes = np.unique(flat[flat >= 0], return_counts=True)
        largest = int(sizes.max())
        largest_label = int(roots[np.argmax(sizes)])
        spanning = _spanning_labels(labels)
        spans = bool(np.isin(largest_label, spanning))
    else:
        sizes = np.empty(0, np.int64)
        largest = 0
        spans = False
    stats = ClusterStats(
        cluster_sizes=sizes.astype(np.int64),
        n_sites=config.n_sites,
        n_occupied=int(occ.sum()),
        largest_size=largest,
        spans=spans,
    )
    return labels, stats


def any_cluster_spans(labels: np.ndarray) -> bool:
    """True if some cluster touches two opposite faces along some axis."""
    return _spanning_labels(labels).size > 0


def spanning_probability(dims: int, L: int, p: float, n_trials: int,
                         seed: int = 0) -> float:
    """Fraction of independent realizations containing a spanning cluster."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    config = LatticeConfig(dims=dims, L=L, p=p, seed=seed)
    hits = 0
    for trial in range(n_trials):
        labels, _ = occupy_and_label(config, trial=trial)
        if any_cluster_spans(labels):
            hits += 1
    return hits / n_trials


def fit_size_exponent(s: np.ndarray, n_s: np.ndarray, s_min: float,
                      s_max: float, bins_per_decade: int = 8) -> float:
    """Fisher exponent tau from a log-log fit of n_s over [s_min, s_max].

    Points are grouped into geometric bins and each bin contributes its
    (mean log s, mean log n_s); the fit is exact for exact power laws and
    gives tail bins equal weight for noisy data. Requires >= 5 non-empty
    bins.
    """
    s = np.asarray(s, dtype=np.float64)
    n_s = np.asarray(n_s, dtype=np.float64)
    keep = (s >= s_min) & (s <= s_max) & (n_s > 0)
    s, n_s = s[keep], n_s[keep]
    if s.size == 0:
        raise InsufficientBinsError("no histogram support in the fit window")
    edges = np.geomspace(s_min, s_max, max(int(np.log10(s_max / s_min) * bins_per_decade), 2) + 1)
    which = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(edges) - 2)
    log_s = np.log(s)
    log_n = np.log(n_s)
    xs, ys = [], []
    for b in np.unique(which):
        sel = which == b
        xs.append(log_s[sel].mean())
        ys.append(log_n[sel].mean())
    if len(xs) < 5:
        raise InsufficientBinsError(
            f"only {len(xs)} non-empty log bins in [{s_min}, {s_max}]"
        )
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope)
