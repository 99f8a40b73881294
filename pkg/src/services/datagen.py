"""
Synthetic Data Generation and Non-IID Partitioning
Gaussian-mixture classification data, a held-out test split, and Dirichlet,
class-shard and IID client partitions.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Any, Tuple
import numpy as np
from scipy.stats import entropy
from sklearn.preprocessing import StandardScaler
from ..core.exceptions import ContractError, PartitionError
from ..core.interfaces import Partitioner
from ..core.models import Batch
from ..utils.seeding import make_rng, STREAM_DATA, STREAM_HOLDOUT, STREAM_PARTITION

PARTITION_SCHEMES = ("dirichlet", "class_shard", "iid")
MAX_PARTITION_RETRIES = 100


@dataclass(eq=False)
class SyntheticDataset:
    """Labeled feature matrix plus the generator metadata that produced it"""
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    class_means: np.ndarray
    noise_scale: float
    seed: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def num_samples(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def batch(self, indices: Optional[np.ndarray] = None) -> Batch:
        """Batch view over the given rows (all rows when indices is None)"""
        if indices is None:
            return Batch(self.features, self.labels)
        return Batch(self.features[indices], self.labels[indices])

    def subset(self, indices: np.ndarray) -> "SyntheticDataset":
        return SyntheticDataset(
            features=self.features[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
            class_means=self.class_means,
            noise_scale=self.noise_scale,
            seed=self.seed,
            metadata=dict(self.metadata),
        )


@dataclass(eq=False)
class Partition:
    """Disjoint per-client index lists over a dataset"""
    assignments: List[np.ndarray]
    alpha: float
    scheme: str

    @property
    def num_clients(self) -> int:
        return len(self.assignments)

    def client_sizes(self) -> np.ndarray:
        return np.array([len(a) for a in self.assignments], dtype=np.int64)

    def label_histogram(self, ds: SyntheticDataset) -> np.ndarray:
        """Counts of each class per client, shape (K, num_classes)"""
        return np.stack([
            np.bincount(ds.labels[idx], minlength=ds.num_classes) for idx in self.assignments
        ])

    def mean_label_entropy(self, ds: SyntheticDataset) -> float:
        """Mean over clients of the (natural-log) entropy of their label distribution"""
        histogram = self.label_histogram(ds)
        return float(np.mean([entropy(row) for row in histogram if row.sum() > 0]))

    def validate(self, num_samples: int) -> None:
        """Disjointness, range and non-empty checks"""
        merged = np.concatenate(self.assignments) if self.assignments else np.array([], dtype=np.int64)
        if merged.size and (merged.min() < 0 or merged.max() >= num_samples):
            raise ContractError(f"partition contains indices outside [0, {num_samples})")
        if np.unique(merged).size != merged.size:
            raise ContractError("partition index lists are not disjoint")
        if np.any(self.client_sizes() < 1):
            raise ContractError("partition has a client without samples")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'scheme': self.scheme,
            'alpha': "inf" if math.isinf(self.alpha) else self.alpha,
            'num_clients': self.num_clients,
            'client_sizes': self.client_sizes().tolist(),
            'assignments': [a.tolist() for a in self.assignments],
        }


def _class_directions(rng: np.random.Generator, num_classes: int, dim: int) -> np.ndarray:
    """Unit-norm class directions; orthonormal whenever num_classes <= dim"""
    if num_classes <= dim:
        q, _ = np.linalg.qr(rng.standard_normal((dim, num_classes)))
        return q.T
    directions = rng.standard_normal((num_classes, dim))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def _standardize(features: np.ndarray) -> Tuple[np.ndarray, Dict[str, Any]]:
    scaler = StandardScaler()
    standardized = scaler.fit_transform(features)
    return standardized, {'feature_mean': scaler.mean_.tolist(), 'feature_scale': scaler.scale_.tolist()}


def _assemble(means: np.ndarray, per_class: int, noise_scale: float, seed: int, kind: str) -> SyntheticDataset:
    num_classes, dim = means.shape
    labels = np.repeat(np.arange(num_classes), per_class)
    rng = make_rng(seed, STREAM_DATA, 1)
    raw = means[labels] + noise_scale * rng.standard_normal((labels.shape[0], dim))
    features, scaling = _standardize(raw)
    metadata = {'generator': kind, 'per_class': per_class, 'dim': dim, **scaling}
    return SyntheticDataset(features, labels, num_classes, means, noise_scale, seed, metadata)


def generate_gaussian_mixture(num_classes: int, per_class: int, dim: int, separation: float,
                              seed: int, noise_scale: float = 1.0) -> SyntheticDataset:
    """Isotropic Gaussian classes centred at separation * (unit direction), then standardized"""
    if num_classes < 1 or per_class < 1 or dim < 1:
        raise ContractError("num_classes, per_class and dim must be positive")
    if separation <= 0:
        raise ContractError(f"separation must be positive, got {separation}")
    if noise_scale < 0:
        raise ContractError(f"noise_scale must be non-negative, got {noise_scale}")
    means = separation * _class_directions(make_rng(seed, STREAM_DATA, 0), num_classes, dim)
    ds = _assemble(means, per_class, noise_scale, seed, 'gaussian_mixture')
    ds.metadata['separation'] = separation
    logging.info(f"Generated Gaussian mixture: {ds.num_samples} samples, {num_classes} classes, dim={dim}")
    return ds


def generate_antipodal_pair(per_class: int, dim: int, separation: float, seed: int,
                            noise_scale: float = 0.0) -> SyntheticDataset:
    """Two classes centred at +separation*e0 and -separation*e0"""
    if per_class < 1 or dim < 1 or separation <= 0:
        raise ContractError("per_class, dim and separation must be positive")
    means = np.zeros((2, dim))
    means[0, 0] = separation
    means[1, 0] = -separation
    ds = _assemble(means, per_class, noise_scale, seed, 'antipodal_pair')
    ds.metadata['separation'] = separation
    logging.info(f"Generated antipodal pair: {ds.num_samples} samples, dim={dim}")
    return ds


def split_holdout(ds: SyntheticDataset, fraction: float, seed: int) -> Tuple[SyntheticDataset, SyntheticDataset]:
    """Move floor(fraction * count) samples of every class into an IID test split"""
    if not 0.0 <= fraction < 1.0:
        raise ContractError(f"holdout fraction must lie in [0, 1), got {fraction}")
    rng = make_rng(seed, STREAM_HOLDOUT)
    train_idx, test_idx = [], []
    for c in range(ds.num_classes):
        members = rng.permutation(np.flatnonzero(ds.labels == c))
        n_test = min(int(math.floor(fraction * members.size)), max(members.size - 1, 0))
        test_idx.append(members[:n_test])
        train_idx.append(members[n_test:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return ds.subset(train), ds.subset(test)


def _largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing exactly to total; leftovers go to the largest fractional parts"""
    quotas = proportions * total
    counts = np.floor(quotas).astype(np.int64)
    leftover = int(total - counts.sum())
    if leftover > 0:
        order = np.argsort(-(quotas - counts), kind='stable')
        counts[order[:leftover]] += 1
    return counts


def _even_counts(total: int, num_clients: int, offset: int) -> np.ndarray:
    counts = np.full(num_clients, total // num_clients, dtype=np.int64)
    for i in range(total % num_clients):
        counts[(offset + i) % num_clients] += 1
    return counts


def _draw_proportions(rng: np.random.Generator, num_clients: int, alpha: float) -> np.ndarray:
    proportions = rng.dirichlet(np.full(num_clients, alpha))
    if not np.all(np.isfinite(proportions)) or proportions.sum() <= 0:
        # tiny alpha can underflow every gamma draw; the limit puts all mass on one client
        proportions = np.zeros(num_clients)
        proportions[rng.integers(num_clients)] = 1.0
    return proportions / proportions.sum()


def _dirichlet_once(ds: SyntheticDataset, num_clients: int, alpha: float,
                    rng: np.random.Generator) -> List[np.ndarray]:
    buckets: List[List[np.ndarray]] = [[] for _ in range(num_clients)]
    for c in range(ds.num_classes):
        members = rng.permutation(np.flatnonzero(ds.labels == c))
        if math.isinf(alpha):
            counts = _even_counts(members.size, num_clients, c)
        else:
            counts = _largest_remainder(_draw_proportions(rng, num_clients, alpha), members.size)
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for k in range(num_clients):
            buckets[k].append(members[bounds[k]:bounds[k + 1]])
    return [np.sort(np.concatenate(parts)).astype(np.int64) for parts in buckets]


def partition_dirichlet(ds: SyntheticDataset, num_clients: int, alpha: float, seed: int) -> Partition:
    """Per-class Dirichlet(alpha) client proportions; alpha=inf gives the even split"""
    if num_clients < 1:
        raise ContractError(f"num_clients must be >= 1, got {num_clients}")
    if not alpha > 0:
        raise ContractError(f"alpha must be positive, got {alpha}")
    if ds.num_samples < num_clients:
        raise ContractError(f"{ds.num_samples} samples cannot cover {num_clients} clients")

    for attempt in range(MAX_PARTITION_RETRIES + 1):
        rng = make_rng(seed + attempt, STREAM_PARTITION)
        assignments = _dirichlet_once(ds, num_clients, alpha, rng)
        if all(len(a) > 0 for a in assignments):
            if attempt:
                logging.info(f"Dirichlet partition succeeded after {attempt} redraw(s)")
            return Partition(assignments, float(alpha), 'dirichlet')
        logging.debug(f"Dirichlet draw with seed {seed + attempt} left a client empty, redrawing")

    raise PartitionError(
        f"Dirichlet partition (alpha={alpha}, K={num_clients}) left a client empty "
        f"after {MAX_PARTITION_RETRIES} redraws"
    )


def partition_class_shard(ds: SyntheticDataset, num_clients: int, seed: int) -> Partition:
    """Shuffle classes and give each client num_classes / K whole classes"""
    if num_clients < 1 or ds.num_classes % num_clients != 0:
        raise ContractError(
            f"class_shard needs num_classes ({ds.num_classes}) divisible by num_clients ({num_clients})"
        )
    classes = make_rng(seed, STREAM_PARTITION).permutation(ds.num_classes)
    groups = classes.reshape(num_clients, ds.num_classes // num_clients)
    assignments = [np.flatnonzero(np.isin(ds.labels, group)).astype(np.int64) for group in groups]
    return Partition(assignments, math.inf, 'class_shard')


def partition_iid(ds: SyntheticDataset, num_clients: int, seed: int) -> Partition:
    """Uniform shuffle split into near-equal contiguous chunks"""
    if num_clients < 1 or ds.num_samples < num_clients:
        raise ContractError(f"{ds.num_samples} samples cannot cover {num_clients} clients")
    order = make_rng(seed, STREAM_PARTITION).permutation(ds.num_samples)
    assignments = [np.sort(chunk).astype(np.int64) for chunk in np.array_split(order, num_clients)]
    return Partition(assignments, math.inf, 'iid')


class DirichletPartitioner(Partitioner):
    def __init__(self, alpha: float):
        self.alpha = alpha

    def partition(self, ds: SyntheticDataset, num_clients: int, seed: int) -> Partition:
        return partition_dirichlet(ds, num_clients, self.alpha, seed)


class ClassShardPartitioner(Partitioner):
    def partition(self, ds: SyntheticDataset, num_clients: int, seed: int) -> Partition:
        return partition_class_shard(ds, num_clients, seed)


class IIDPartitioner(Partitioner):
    def partition(self, ds: SyntheticDataset, num_clients: int, seed: int) -> Partition:
        return partition_iid(ds, num_clients, seed)


def build_partitioner(scheme: str, alpha: Optional[float] = None) -> Partitioner:
    if scheme == 'dirichlet':
        if alpha is None:
            raise ContractError("dirichlet partitioning requires alpha")
        return DirichletPartitioner(alpha)
    if scheme == 'class_shard':
        return ClassShardPartitioner()
    if scheme == 'iid':
        return IIDPartitioner()
    raise ContractError(f"unknown partition scheme '{scheme}', expected one of {PARTITION_SCHEMES}")


def dump_partition(ds: SyntheticDataset, partition: Partition, path: str) -> None:
    """Write dataset metadata and client index lists as JSON for external inspection"""
    document = {
        'dataset': {
            'num_samples': ds.num_samples,
            'num_classes': ds.num_classes,
            'dim': ds.dim,
            'seed': ds.seed,
            'noise_scale': ds.noise_scale,
            'class_counts': ds.class_counts().tolist(),
            'class_means': ds.class_means.tolist(),
            'metadata': ds.metadata,
        },
        'partition': partition.to_dict(),
        'label_histogram': partition.label_histogram(ds).tolist(),
    }
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        logging.error(f"Failed to write partition dump to {target}: {e}")
        raise OSError(f"cannot write partition dump to '{target}': {e}") from e
