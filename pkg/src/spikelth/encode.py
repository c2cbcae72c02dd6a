"""Spike encoding and desk-scale datasets."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import DomainError


class CsvParseError(ValueError):
    """Malformed feature CSV; ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class LabeledSpikeDataset:
    """Stacked samples: ``spikes`` is ``(n, T, N)`` uint8, ``labels`` is ``(n,)``."""

    spikes: np.ndarray
    labels: np.ndarray
    n_classes: int
    prototypes: np.ndarray | None = None

    def __post_init__(self):
        self.spikes = np.asarray(self.spikes, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.spikes.ndim != 3:
            raise DomainError("spikes must be (n_samples, T, N)")
        if self.labels.shape != (self.spikes.shape[0],):
            raise DomainError("one label per sample is required")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DomainError("labels must lie in [0, n_classes)")

    def __len__(self) -> int:
        return self.spikes.shape[0]

    @property
    def T(self) -> int:
        return self.spikes.shape[1]

    @property
    def N(self) -> int:
        return self.spikes.shape[2]

    @property
    def samples(self):
        return list(zip(self.spikes, self.labels.tolist()))

    def subset(self, index) -> "LabeledSpikeDataset":
        return LabeledSpikeDataset(self.spikes[index], self.labels[index], self.n_classes, self.prototypes)

    def split(self, fraction: float, seed: int = 0):
        """Shuffle deterministically and split into (first, second)."""
        order = np.random.default_rng(seed).permutation(len(self))
        cut = int(round(fraction * len(self)))
        return self.subset(order[:cut]), self.subset(order[cut:])


def rate_encode(features, T: int, seed: int) -> np.ndarray:
    """Bernoulli rate code: entry ``(t, i)`` fires with probability ``features[i]``."""
    p = np.asarray(features, dtype=np.float64)
    if p.ndim != 1:
        raise DomainError("features must be a vector")
    if T < 1:
        raise DomainError("T must be at least 1")
    bad = np.flatnonzero(~((p >= 0.0) & (p <= 1.0)))
    if bad.size:
        raise DomainError(f"feature {bad[0]} = {p[bad[0]]} outside [0, 1]")
    rng = np.random.default_rng(seed)
    return (rng.random((T, p.size)) < p).astype(np.uint8)


def _spread_prototypes(n_classes: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """Distinct binary prototypes chosen greedily to keep Hamming distances large."""
    if n_classes > 2**N:
        raise DomainError(f"n_classes={n_classes} exceeds 2**N={2**N}")
    protos = [rng.integers(0, 2, size=N, dtype=np.uint8)]
    while len(protos) < n_classes:
        cands = rng.integers(0, 2, size=(64, N), dtype=np.uint8)
        existing = np.array(protos)
        dist = (cands[:, None, :] != existing[None]).sum(-1).min(axis=1)
        best = int(np.argmax(dist))
        if dist[best] == 0:
            continue
        protos.append(cands[best])
    return np.array(protos)


def synthetic_patterns(
    n_classes: int,
    N: int,
    T: int,
    flip_noise: float,
    count_per_class: int,
    seed: int,
) -> LabeledSpikeDataset:
    """Noisy copies of one fixed binary prototype per class, repeated over ``T``."""
    if not (0.0 <= flip_noise < 0.5):
        raise DomainError("flip_noise must lie in [0, 0.5)")
    if T < 1 or N < 1 or n_classes < 1 or count_per_class < 0:
        raise DomainError("n_classes, N, T must be positive and count_per_class nonnegative")
    rng = np.random.default_rng(seed)
    protos = _spread_prototypes(n_classes, N, rng)
    labels = np.repeat(np.arange(n_classes), count_per_class)
    flips = (rng.random((labels.size, N)) < flip_noise).astype(np.uint8)
    patterns = protos[labels] ^ flips
    spikes = np.repeat(patterns[:, None, :], T, axis=1)
    order = rng.permutation(labels.size)
    return LabeledSpikeDataset(spikes[order], labels[order], n_classes, prototypes=protos)


def load_feature_csv(path, T: int, seed: int, n_classes: int | None = None) -> LabeledSpikeDataset:
    """Read ``f1,...,fN,label`` rows and rate-encode each row.

    Row ``r`` (0-based among data rows) is encoded with seed ``(seed, r)``,
    so the result does not depend on how rows are iterated.
    """
    feats, labels = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise CsvParseError(lineno, "need at least one feature and a label")
            try:
                values = [float(c) for c in row[:-1]]
                label = int(row[-1])
            except ValueError as exc:
                raise CsvParseError(lineno, str(exc)) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise CsvParseError(lineno, f"expected {width} features, got {len(values)}")
            for col, v in enumerate(values, start=1):
                if not (0.0 <= v <= 1.0):
                    raise DomainError(f"line {lineno}, column {col}: feature {v} outside [0, 1]")
            if label < 0:
                raise CsvParseError(lineno, f"negative label {label}")
            feats.append(values)
            labels.append(label)
    if not feats:
        return LabeledSpikeDataset(np.zeros((0, T, 0), np.uint8), np.zeros(0, np.int64), n_classes or 0)
    spikes = np.stack(
        [rate_encode(f, T, np.random.SeedSequence([seed, r]).generate_state(1, np.uint64)[0]) for r, f in enumerate(feats)]
    )
    if n_classes is None:
        n_classes = max(labels) + 1
    return LabeledSpikeDataset(spikes, np.array(labels), n_classes)
