"""Dataset container, CSV output, and config-file loading.

Container layout (little-endian), magic "PCLW1": a fixed header carrying
the simulation config, realized seed and rejection counts, then one block
per cluster: u64 size, u8 degenerate flag, int32 parent indices (root -1),
int32 depths, float64 standardized values. A JSON sidecar (same path +
".json") duplicates the config and rejection counts for tooling. Writes
are deterministic: identical datasets produce byte-identical files.
"""

import configparser
import csv
import hashlib
import json
import struct
from dataclasses import asdict

import numpy as np

from .bethe import Cluster, Dataset, SimConfig

MAGIC = b"PCLW1"
_HEADER = struct.Struct("<IIdQQIdQQQQI")  # d z p min max ncl walk seed rseed rs rl count


class ContainerError(ValueError):
    """Malformed or mismatched dataset container."""


def write_dataset(dataset: Dataset, path: str) -> None:
    cfg = dataset.config
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(
            cfg.d, cfg.z, cfg.p, cfg.min_size, cfg.max_size, cfg.n_clusters,
            cfg.walk_std, cfg.seed, dataset.seed,
            dataset.n_rejected_small, dataset.n_rejected_large,
            len(dataset.clusters),
        ))
        for cluster in dataset.clusters:
            fh.write(struct.pack("<QB", cluster.size, int(cluster.degenerate)))
            fh.write(cluster.parent.astype("<i4").tobytes())
            fh.write(cluster.depth.astype("<i4").tobytes())
            fh.write(cluster.value.astype("<f8").tobytes())
    sidecar = {
        "format": MAGIC.decode(),
        "config": asdict(cfg),
        "seed": dataset.seed,
        "n_rejected_small": dataset.n_rejected_small,
        "n_rejected_large": dataset.n_rejected_large,
        "sizes": dataset.sizes.tolist(),
    }
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset(path: str) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ContainerError(f"{path}: bad magic {magic!r}")
        (d, z, p, min_size, max_size, n_clusters, walk_std, seed, rseed,
         n_small, n_large, count) = _HEADER.unpack(fh.read(_HEADER.size))
        config = SimConfig(d=d, z=z, p=p, min_size=min_size, max_size=max_size,
                           n_clusters=n_clusters, walk_std=walk_std, seed=seed)
        clusters = []
        for rank in range(1, count + 1):
            raw = fh.read(9)
            if len(raw) != 9:
                raise ContainerError(f"{path}: truncated cluster header")
            size, degenerate = struct.unpack("<QB", raw)
            parent = np.frombuffer(fh.read(4 * size), dtype="<i4").copy()
            depth = np.frombuffer(fh.read(4 * size), dtype="<i4").copy()
            value = np.frombuffer(fh.read(8 * size), dtype="<f8").copy()
            if value.size != size:
                raise ContainerError(f"{path}: truncated cluster block")
            clusters.append(Cluster(parent=parent, depth=depth, value=value,
                                    rank=rank, degenerate=bool(degenerate)))
    return Dataset(clusters, config, rseed, n_small, n_large)


def dataset_digest(dataset: Dataset) -> str:
    """Content hash over config, seed and every cluster's arrays."""
    h = hashlib.sha256()
    h.update(repr(dataset.config).encode())
    h.update(struct.pack("<QQQ", dataset.seed, dataset.n_rejected_small,
                         dataset.n_rejected_large))
    for cluster in dataset.clusters:
        h.update(cluster.parent.astype("<i4").tobytes())
        h.update(cluster.depth.astype("<i4").tobytes())
        h.update(cluster.value.astype("<f8").tobytes())
    return h.hexdigest()


def write_csv(path: str, header: list[str], rows) -> None:
    """Comma-separated, '.' decimals, header row, LF line endings."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_xy_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Two-column numeric CSV; a non-numeric first row is taken as header."""
    xs, ys = [], []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise ContainerError(f"{path}:{i + 1}: expected two numbers")
            xs.append(x)
            ys.append(y)
    return np.array(xs), np.array(ys)


class ConfigError(ValueError):
    """Bad key or section in a run-config file."""


def load_config_file(path: str) -> dict[str, dict[str, str]]:
    """key=value sections, one section per subcommand."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return {section: dict(parser.items(section)) for section in parser.sections()}
