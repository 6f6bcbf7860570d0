"""Experiment orchestration.

Three measurement campaigns over simulated datasets:

  * per-cluster capacity calibration: fit the scale factor m converting
    effective degrees of freedom to training points through the broken
    power law L = 1 below the break, (P/m)**-(c/D) above it;
  * DOF-allocation sweep: loss landscape over random (b, k_br) allocation
    parameters, with the theoretically optimal cell marked;
  * model- and data-scaling curves over many seeds, aggregated as median
    with percentile bands and overlaid with the anchored theory curve.

Aggregate losses weight each cluster by its size (a cluster contributes
to the loss in proportion to its size), with per-cluster MSEs measured on
fixed-size test sets. All randomness is keyed by (master seed, stream tag,
indices), so results are deterministic and seeds can run in parallel.
"""

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bethe import Dataset, SimConfig, generate_dataset
from .model import evaluate_cluster_sse
from .rng import (TAG_CALIB, TAG_DATASET, TAG_EVAL, TAG_MULTINOMIAL,
                  TAG_SWEEP, Stream, derive_stream)
from .theory import TheoryParams, allocation_exponent, model_loss, data_loss, solve_kbr

M_WARN_THRESHOLD = 100.0


class CalibrationError(RuntimeError):
    """Raised when a cluster's loss curve cannot constrain the break."""


def n_workers() -> int:
    """Worker-pool size; PERCLAW_THREADS caps machine parallelism."""
    env = os.environ.get("PERCLAW_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer apportionment of ``total`` proportional to ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    if total < 0:
        raise ValueError("total must be nonnegative")
    wsum = w.sum()
    if wsum <= 0:
        raise ValueError("weights must have positive sum")
    target = w * (total / wsum)
    base = np.floor(target).astype(np.int64)
    short = int(total - base.sum())
    if short > 0:
        frac = target - base
        order = np.lexsort((np.arange(w.size), -frac))
        base[order[:short]] += 1
    return base


def dof_to_train_counts(n_dof: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Training points P_k = round(m_k * n_k), nudged so that the implied
    DOF sum |sum P_k/m_k - N| stays within 1."""
    n_dof = np.asarray(n_dof, dtype=np.int64)
    m = np.asarray(m, dtype=np.float64)
    P = np.rint(m * n_dof).astype(np.int64)
    drift = float((P / m).sum() - n_dof.sum())
    while drift > 1.0:
        excess = np.where(P > 0, P / m - n_dof, -np.inf)
        j = int(np.argmax(excess))
        P[j] -= 1
        drift -= 1.0 / m[j]
    while drift < -1.0:
        j = int(np.argmin(P / m - n_dof))
        P[j] += 1
        drift += 1.0 / m[j]
    return P


def allocation_weights(n_clusters: int, b: float, k_br: float) -> np.ndarray:
    """Unnormalized n_k ~ k**(b-1) below the break rank, 0 at and above."""
    k = np.arange(1, n_clusters + 1, dtype=np.float64)
    w = np.power(k, b - 1.0)
    w[k >= k_br] = 0.0
    return w


# --- per-cluster loss measurement ------------------------------------------

def complement_sites(sorted_excluded: np.ndarray, picks: np.ndarray) -> np.ndarray:
    """Map ranks within the complement of ``sorted_excluded`` to site indices."""
    if sorted_excluded.size == 0:
        return picks
    shifted = sorted_excluded - np.arange(sorted_excluded.size)
    return picks + np.searchsorted(shifted, picks, side="right")


@dataclass
class ClusterLossTable:
    """Memoized per-cluster test MSE as a function of train count.

    Each cluster owns one fixed test set (drawn once per table seed);
    training sites are drawn from its complement, keyed by (seed, tag,
    cluster, P, rep). Cells evaluated against the same table therefore
    share test sets exactly, so comparisons between allocations are
    paired and test-sampling noise cancels out of rankings.
    """

    dataset: Dataset
    seed: int
    test_count: int = 400
    n_reps: int = 1
    tag: int = TAG_EVAL
    _cache: dict = field(default_factory=dict)
    _tests: dict = field(default_factory=dict)

    def test_size(self, idx: int) -> int:
        return min(self.test_count, self.dataset.sizes[idx] // 4)

    def max_train(self, idx: int) -> int:
        return int(self.dataset.sizes[idx] - self.test_size(idx))

    def test_set(self, idx: int) -> np.ndarray:
        hit = self._tests.get(idx)
        if hit is None:
            stream = Stream.from_path(self.seed, self.tag, idx)
            hit = np.sort(stream.sample_distinct(self.test_size(idx),
                                                 self.dataset.sizes[idx]))
            self._tests[idx] = hit
        return hit

    def train_set(self, idx: int, P: int, rep: int) -> np.ndarray:
        test = self.test_set(idx)
        n_free = int(self.dataset.sizes[idx] - test.size)
        stream = Stream.from_path(self.seed, self.tag, idx, P, rep)
        return complement_sites(test, stream.sample_distinct(P, n_free))

    def mse(self, idx: int, P: int) -> float:
        key = (idx, P)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        cluster = self.dataset.clusters[idx]
        test = self.test_set(idx)
        total = 0.0
        for rep in range(self.n_reps):
            train = self.train_set(idx, P, rep)
            sse_b, _ = evaluate_cluster_sse(cluster, train, test)
            total += sse_b / test.size
        out = total / self.n_reps
        self._cache[key] = out
        return out

    def weighted_loss(self, train_counts: np.ndarray) -> float:
        """Size-weighted loss over all clusters at the given train counts."""
        sizes = self.dataset.sizes.astype(np.float64)
        mses = np.array([self.mse(i, int(p)) for i, p in enumerate(train_counts)])
        return float((sizes * mses).sum() / sizes.sum())


# --- m calibration ----------------------------------------------------------

@dataclass(frozen=True)
class CalibrationSettings:
    p_max: int = 2048  # train-count grid: 1, 2, 4, ... up to p_max
    test_count: int = 400
    n_reps: int = 2
    c_over_d: float = 0.5
    m_lo: float = 0.25
    m_hi: float = 256.0
    plateau_floor: float = 0.8  # fit fails if the curve never drops below


@dataclass
class ClusterCalibration:
    """Per-cluster DOF-to-training-point scale factors and fit residuals."""

    m: np.ndarray
    residual: np.ndarray

    def __post_init__(self):
        if np.any(self.m < 1.0):
            raise ValueError("m must be >= 1")


def _broken_law_logloss(logP: np.ndarray, log_m: float, c_over_d: float) -> np.ndarray:
    return -c_over_d * np.maximum(0.0, logP - log_m)


def fit_break_scale(P: np.ndarray, L: np.ndarray, c_over_d: float,
                    m_lo: float, m_hi: float) -> tuple[float, float]:
    """(m, rms log residual) minimizing squared log-loss residuals against
    the broken law; 1-D grid search with golden-section refinement."""
    logP = np.log(np.asarray(P, dtype=np.float64))
    logL = np.log(np.asarray(L, dtype=np.float64))

    def ssq(log_m: float) -> float:
        r = logL - _broken_law_logloss(logP, log_m, c_over_d)
        return float(r @ r)

    grid = np.linspace(np.log(m_lo), np.log(m_hi), 1024)
    vals = [ssq(g) for g in grid]
    j = int(np.argmin(vals))
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, grid.size - 1)]
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - phi * (b - a)
    c2 = a + phi * (b - a)
    f1, f2 = ssq(c1), ssq(c2)
    for _ in range(60):
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - phi * (b - a)
            f1 = ssq(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + phi * (b - a)
            f2 = ssq(c2)
    log_m = 0.5 * (a + b)
    return float(np.exp(log_m)), float(np.sqrt(ssq(log_m) / P.size))


def calibration_grid(size: int, settings: CalibrationSettings) -> np.ndarray:
    """Geometric train-count grid that fits alongside the test set."""
    n_test = min(settings.test_count, size // 4)
    p_cap = min(settings.p_max, size - n_test)
    grid = []
    p = 1
    while p <= p_cap:
        grid.append(p)
        p *= 2
    return np.array(grid, dtype=np.int64)


def measure_cluster_curve(dataset: Dataset, idx: int, p_grid: np.ndarray,
                          seed: int, settings: CalibrationSettings,
                          table: ClusterLossTable | None = None) -> np.ndarray:
    """Mean test MSE at each train count, averaged over rep train draws."""
    if table is None:
        table = ClusterLossTable(dataset, seed=seed, tag=TAG_CALIB,
                                 test_count=settings.test_count,
                                 n_reps=settings.n_reps)
    return np.array([table.mse(idx, int(P)) for P in p_grid])


def fit_cluster_m(dataset: Dataset, rank: int, seed: int = 0,
                  settings: CalibrationSettings = CalibrationSettings(),
                  p_grid: np.ndarray | None = None,
                  table: ClusterLossTable | None = None) -> tuple[float, float]:
    """Fit the scale factor m for the cluster with 1-based rank.

    Returns (m, rms log residual). Raises CalibrationError when the
    measured curve never leaves the random-guess plateau.
    """
    idx = rank - 1
    if not 0 <= idx < len(dataset.clusters):
        raise ValueError(f"rank {rank} outside 1..{len(dataset.clusters)}")
    if p_grid is None:
        p_grid = calibration_grid(dataset.sizes[idx], settings)
    curve = measure_cluster_curve(dataset, idx, p_grid, seed, settings, table)
    if curve.min() > settings.plateau_floor:
        raise CalibrationError(
            f"cluster rank {rank}: loss never drops below "
            f"{settings.plateau_floor} on the train-count grid (min "
            f"{curve.min():.3f}); grid too short for this cluster"
        )
    m, residual = fit_break_scale(p_grid, curve, settings.c_over_d,
                                  settings.m_lo, settings.m_hi)
    return max(1.0, m), residual


def dataset_hash(dataset: Dataset) -> str:
    h = hashlib.sha256()
    h.update(repr(dataset.config).encode())
    h.update(str(dataset.seed).encode())
    h.update(dataset.sizes.tobytes())
    return h.hexdigest()[:24]


def calibrate_dataset(dataset: Dataset, seed: int = 0,
                      settings: CalibrationSettings = CalibrationSettings(),
                      cache_dir: str | None = None) -> ClusterCalibration:
    """Fit m for every cluster; disk-cached by dataset content hash."""
    cache_path = None
    if cache_dir is not None:
        key = dataset_hash(dataset)
        tag = f"{seed}_{settings.p_max}_{settings.test_count}_{settings.n_reps}"
        cache_path = os.path.join(cache_dir, f"calib_{key}_{tag}.json")
        if os.path.exists(cache_path):
            with open(cache_path) as fh:
                payload = json.load(fh)
            return ClusterCalibration(np.array(payload["m"]),
                                      np.array(payload["residual"]))
    n = len(dataset.clusters)
    m = np.empty(n)
    residual = np.empty(n)
    table = ClusterLossTable(dataset, seed=seed, tag=TAG_CALIB,
                             test_count=settings.test_count,
                             n_reps=settings.n_reps)
    for rank in range(1, n + 1):
        m[rank - 1], residual[rank - 1] = fit_cluster_m(
            dataset, rank, seed=seed, settings=settings, table=table
        )
    calib = ClusterCalibration(m, residual)
    if cache_path is not None:
        os.makedirs(cache_dir, exist_ok=True)
        tmp = cache_path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump({"m": m.tolist(), "residual": residual.tolist()}, fh)
        os.replace(tmp, cache_path)
    return calib


# --- DOF sweep ---------------------------------------------------------------

@dataclass
class SweepResult:
    """Loss landscape over sampled (b, k_br) allocations for one N."""

    N: int
    b: np.ndarray
    k_br: np.ndarray
    loss: np.ndarray
    feasible: np.ndarray
    theory_b: float
    theory_kbr: float
    theory_loss: float

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.loss))

    def theory_rank_fraction(self) -> float:
        """Fraction of sampled cells strictly better than the theory cell."""
        return float(np.mean(self.loss < self.theory_loss))


def _allocation_loss(table: ClusterLossTable, calibration: ClusterCalibration,
                     N: int, b: float, k_br: float):
    n_clusters = len(table.dataset.clusters)
    weights = allocation_weights(n_clusters, b, k_br)
    n_int = largest_remainder(weights, N)
    P = dof_to_train_counts(n_int, calibration.m)
    feasible = True
    for idx in range(n_clusters):
        cap = table.max_train(idx)
        if P[idx] > cap:
            P[idx] = cap
            feasible = False
    return table.weighted_loss(P), feasible


def dof_sweep(dataset: Dataset, calibration: ClusterCalibration, N: int,
              n_samples: int = 2000, seed: int = 0,
              b_range: tuple[float, float] = (-1.5, 1.0),
              kbr_range: tuple[float, float] | None = None,
              params: TheoryParams = TheoryParams(),
              test_count: int = 1000, n_reps: int = 2) -> SweepResult:
    """Measure the loss at n_samples uniform (b, k_br) cells plus the
    theoretical optimum."""
    n_clusters = len(dataset.clusters)
    if kbr_range is None:
        kbr_range = (2.0, float(n_clusters))
    stream = Stream.from_path(seed, TAG_SWEEP, N)
    u = stream.uniform(2 * n_samples)
    bs = b_range[0] + (b_range[1] - b_range[0]) * u[:n_samples]
    kbrs = kbr_range[0] + (kbr_range[1] - kbr_range[0]) * u[n_samples:]
    table = ClusterLossTable(dataset, seed=seed, test_count=test_count,
                             n_reps=n_reps)
    loss = np.empty(n_samples)
    feasible = np.empty(n_samples, dtype=bool)
    for i in range(n_samples):
        loss[i], feasible[i] = _allocation_loss(table, calibration, N,
                                                float(bs[i]), float(kbrs[i]))
    tb = allocation_exponent(params.c_over_d, params.alpha)
    tkbr = min(solve_kbr(N, tb), float(n_clusters))
    tloss, _ = _allocation_loss(table, calibration, N, tb, tkbr)
    return SweepResult(N=N, b=bs, k_br=kbrs, loss=loss, feasible=feasible,
                       theory_b=tb, theory_kbr=tkbr, theory_loss=tloss)


# --- scaling curves ----------------------------------------------------------

@dataclass
class ScalingCurve:
    """Median loss with percentile bands, plus the anchored theory curve."""

    scale: np.ndarray
    median: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    theory: np.ndarray
    per_seed: np.ndarray  # shape (n_seeds, n_scales)
    percentiles: tuple[float, float]

    def coverage(self) -> float:
        """Fraction of grid points where the theory curve sits inside the
        measured percentile band."""
        inside = (self.theory >= self.band_lo) & (self.theory <= self.band_hi)
        return float(np.mean(inside))


@dataclass(frozen=True)
class ScalingSettings:
    n_seeds: int = 50
    master_seed: int = 0
    test_count: int = 400
    percentiles: tuple[float, float] = (16.0, 84.0)
    calibration: CalibrationSettings = CalibrationSettings()
    cache_dir: str | None = None
    # Data scaling: interpret the sampled per-cluster counts as DOF and
    # convert to training points through the fitted m (P_k = m_k * l_k),
    # so each cluster's loss breaks at l_k ~ 1 as the theory assumes.
    # Set False to train on the raw sampled counts instead.
    apply_m_to_data: bool = True
    workers: int | None = None


def _model_scaling_seed(args):
    config, seed_index, N_grid, settings, params = args
    dataset_seed = derive_stream(settings.master_seed, TAG_DATASET, seed_index)
    dataset = generate_dataset(config, dataset_seed)
    calibration = calibrate_dataset(dataset, seed=settings.master_seed,
                                    settings=settings.calibration,
                                    cache_dir=settings.cache_dir)
    table = ClusterLossTable(dataset, seed=dataset_seed,
                             test_count=settings.test_count)
    b = allocation_exponent(params.c_over_d, params.alpha)
    out = np.empty(len(N_grid))
    for j, N in enumerate(N_grid):
        kbr = min(solve_kbr(N, b), float(len(dataset.clusters)))
        out[j], _ = _allocation_loss(table, calibration, int(N), b, kbr)
    return seed_index, out


def _data_scaling_seed(args):
    config, seed_index, D_grid, settings, _params = args
    dataset_seed = derive_stream(settings.master_seed, TAG_DATASET, seed_index)
    dataset = generate_dataset(config, dataset_seed)
    table = ClusterLossTable(dataset, seed=dataset_seed,
                             test_count=settings.test_count)
    sizes = dataset.sizes.astype(np.float64)
    size_cdf = np.cumsum(sizes / sizes.sum())
    if settings.apply_m_to_data:
        calibration = calibrate_dataset(dataset, seed=settings.master_seed,
                                        settings=settings.calibration,
                                        cache_dir=settings.cache_dir)
        m = calibration.m
    else:
        m = None
    out = np.empty(len(D_grid))
    for j, D in enumerate(D_grid):
        stream = Stream.from_path(settings.master_seed, TAG_MULTINOMIAL,
                                  seed_index, j)
        which = stream.categorical(size_cdf, int(D))
        counts = np.bincount(which, minlength=len(dataset.clusters)).astype(np.int64)
        if m is not None:
            counts = np.rint(m * counts).astype(np.int64)
        for idx in range(counts.size):
            cap = table.max_train(idx)
            if counts[idx] > cap:
                counts[idx] = cap
        out[j] = table.weighted_loss(counts)
    return seed_index, out


def _run_scaling(worker, config: SimConfig, grid, settings: ScalingSettings,
                 params: TheoryParams, theory_fn) -> ScalingCurve:
    grid = np.asarray(grid, dtype=np.float64)
    jobs = [(config, i, grid, settings, params) for i in range(settings.n_seeds)]
    per_seed = np.empty((settings.n_seeds, grid.size))
    workers = settings.workers if settings.workers is not None else n_workers()
    if workers > 1 and settings.n_seeds > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for seed_index, row in pool.map(worker, jobs):
                per_seed[seed_index] = row
    else:
        for job in jobs:
            seed_index, row = worker(job)
            per_seed[seed_index] = row
    lo_q, hi_q = settings.percentiles
    median = np.median(per_seed, axis=0)
    band_lo = np.percentile(per_seed, lo_q, axis=0)
    band_hi = np.percentile(per_seed, hi_q, axis=0)
    theory = theory_fn(grid, params)
    theory = theory * (median[0] / theory[0])  # anchored at the smallest scale
    return ScalingCurve(scale=grid, median=median, band_lo=band_lo,
                        band_hi=band_hi, theory=theory, per_seed=per_seed,
                        percentiles=settings.percentiles)


def run_model_scaling(config: SimConfig, N_grid,
                      settings: ScalingSettings = ScalingSettings(),
                      params: TheoryParams = TheoryParams()) -> ScalingCurve:
    """Loss vs model DOF with the optimal allocation, across seeds."""
    return _run_scaling(_model_scaling_seed, config, N_grid, settings, params,
                        lambda g, p: model_loss(g, p))


def run_data_scaling(config: SimConfig, D_grid,
                     settings: ScalingSettings = ScalingSettings(),
                     params: TheoryParams = TheoryParams()) -> ScalingCurve:
    """Loss vs training-set size with size-proportional sampling."""
    return _run_scaling(_data_scaling_seed, config, D_grid, settings, params,
                        lambda g, p: data_loss(g, p))
