"""Bayesian nearest-neighbor regression on cluster trees.

The predictor shrinks the nearest training value toward the prior mean 0
by the factor 1/(1 + d_nn/sqrt(s)): the branching random walk puts a
variance proportional to d_nn/sqrt(s) between sites at hop distance d_nn
in an s-site cluster, and the standardized values have a standard-normal
marginal. A cluster with no training sites predicts the prior mean.
"""

from dataclasses import dataclass

import numpy as np

from . import _model_kernels as _k
from ._accel import NUMBA_ENABLED
from .bethe import Cluster, Dataset
from .rng import TAG_SPLIT, Stream

PRIOR_MEAN = 0.0
PRIOR_VAR = 1.0


def tree_distance(cluster: Cluster, u: int, v: int) -> int:
    """Hop count between sites u and v of one cluster."""
    n = cluster.size
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError(f"site out of range for cluster of size {n}")
    if NUMBA_ENABLED:
        return int(_k.tree_dist_jit(cluster.parent, cluster.depth, u, v))
    return int(_k.tree_dist_numpy(cluster.parent, cluster.depth, u, v))


def predict(y_nn, d_nn, s):
    """Shrunk prediction y_nn / (1 + d_nn/sqrt(s))."""
    return np.asarray(y_nn) / (1.0 + np.asarray(d_nn) / np.sqrt(s))


def naive_predict(y_nn):
    """Conventional nearest-neighbor prediction: the neighbor's value."""
    return y_nn


@dataclass(frozen=True)
class SplitSpec:
    """Per-cluster train/test sizes; scalars broadcast over clusters.

    test_count defaults to min(1000, sites remaining after training).
    """

    train_count: int | np.ndarray
    test_count: int | np.ndarray | None = None
    seed: int = 0

    def resolve(self, sizes: np.ndarray):
        train = np.broadcast_to(np.asarray(self.train_count, dtype=np.int64),
                                sizes.shape).copy()
        if self.test_count is None:
            test = np.minimum(1000, sizes - train)
        else:
            test = np.broadcast_to(np.asarray(self.test_count, dtype=np.int64),
                                   sizes.shape).copy()
        if np.any(train < 0) or np.any(test < 0):
            raise ValueError("negative train or test count")
        if np.any(train + test > sizes):
            bad = int(np.argmax(train + test > sizes))
            raise ValueError(
                f"train+test = {train[bad] + test[bad]} exceeds cluster size "
                f"{sizes[bad]} (cluster index {bad})"
            )
        return train, test


@dataclass
class Split:
    """Disjoint per-cluster train/test site indices."""

    train: list[np.ndarray]
    test: list[np.ndarray]


def sample_split_indices(size: int, n_train: int, n_test: int,
                         stream: Stream) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint train/test site indices for one cluster."""
    picked = stream.sample_distinct(n_train + n_test, size)
    train = np.sort(picked[:n_train])
    test = picked[n_train:]
    return train, test


def make_split(dataset: Dataset, spec: SplitSpec) -> Split:
    train_counts, test_counts = spec.resolve(dataset.sizes)
    train_list = []
    test_list = []
    for idx, cluster in enumerate(dataset.clusters):
        stream = Stream.from_path(spec.seed, TAG_SPLIT, idx)
        train, test = sample_split_indices(
            cluster.size, int(train_counts[idx]), int(test_counts[idx]), stream
        )
        train_list.append(train)
        test_list.append(test)
    return Split(train=train_list, test=test_list)


@dataclass
class TrainedRegressor:
    """Per-cluster training sites over a read-only dataset.

    Prior mean 0 and prior variance 1 are fixed by standardization.
    estimator is "bayes" (shrunk) or "naive" (plain nearest neighbor).
    """

    dataset: Dataset
    train_indices: list[np.ndarray]
    estimator: str = "bayes"

    def __post_init__(self):
        if self.estimator not in ("bayes", "naive"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if len(self.train_indices) != len(self.dataset.clusters):
            raise ValueError("one training index list per cluster required")
        clean = []
        for idx, (cluster, train) in enumerate(
            zip(self.dataset.clusters, self.train_indices)
        ):
            train = np.asarray(train, dtype=np.int64)
            if train.size and (train.min() < 0 or train.max() >= cluster.size):
                raise ValueError(f"training site out of range in cluster {idx}")
            srt = np.sort(train)
            if np.any(np.diff(srt) == 0):
                raise ValueError(f"duplicate training site in cluster {idx}")
            clean.append(srt)
        self.train_indices = clean


def fit(dataset: Dataset, split: Split, estimator: str = "bayes") -> TrainedRegressor:
    return TrainedRegressor(dataset, split.train, estimator)


def evaluate_cluster_sse(cluster: Cluster, train: np.ndarray,
                         test: np.ndarray) -> tuple[float, float]:
    """(bayes SSE, naive SSE) over the test sites of one cluster."""
    train = np.ascontiguousarray(np.sort(np.asarray(train, dtype=np.int64)))
    test = np.ascontiguousarray(np.asarray(test, dtype=np.int64))
    sqrt_s = float(np.sqrt(cluster.size))
    if NUMBA_ENABLED:
        t_depths = cluster.depth[train].astype(np.int64)
        order = np.argsort(t_depths, kind="stable")
        return _k.evaluate_cluster_jit(
            cluster.parent, cluster.depth, cluster.value,
            np.ascontiguousarray(train[order]),
            np.ascontiguousarray(t_depths[order]),
            test, sqrt_s,
        )
    return _k.evaluate_cluster_numpy(
        cluster.parent, cluster.depth, cluster.value, train, test, sqrt_s
    )


@dataclass
class EvalResult:
    per_cluster_mse: np.ndarray
    per_cluster_n: np.ndarray
    total_mse: float


def evaluate(dataset: Dataset, regressor: TrainedRegressor,
             split: Split) -> EvalResult:
    """Mean squared error per cluster and pooled over all test sites."""
    n_clusters = len(dataset.clusters)
    mse = np.full(n_clusters, np.nan)
    counts = np.zeros(n_clusters, dtype=np.int64)
    total_sse = 0.0
    pick = 0 if regressor.estimator == "bayes" else 1
    for idx, cluster in enumerate(dataset.clusters):
        test = split.test[idx]
        counts[idx] = test.size
        if test.size == 0:
            continue
        sse = evaluate_cluster_sse(cluster, regressor.train_indices[idx], test)[pick]
        mse[idx] = sse / test.size
        total_sse += sse
    total = int(counts.sum())
    if total == 0:
        raise ValueError("empty test set")
    return EvalResult(mse, counts, total_sse / total)
