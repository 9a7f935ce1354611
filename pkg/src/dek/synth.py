"""Planted-partition mixed data and the adjusted Rand index."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ColumnSpec, Dataset, Schema, normalize
from .errors import InvalidSpec, LengthMismatch


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a dataset with known cluster labels.

    Continuous columns are Gaussian with unit within-cluster std; along every
    column the cluster centers sit on a shuffled grid with spacing
    ``separation``. Each categorical column takes the cluster's modal value
    with probability ``purity`` and a uniformly drawn other value otherwise.
    """

    n_per_cluster: int = 100
    k_true: int = 3
    d_con: int = 4
    choices: tuple = (4, 4, 4)
    separation: float = 6.0
    purity: float = 0.95
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))
        if self.n_per_cluster < 1 or self.k_true < 1:
            raise InvalidSpec("n_per_cluster and k_true must be >= 1")
        if self.d_con < 0 or self.d_con + len(self.choices) == 0:
            raise InvalidSpec("need at least one column")
        if any(c < 2 for c in self.choices):
            raise InvalidSpec("categorical columns need >= 2 choices")
        if self.separation < 0:
            raise InvalidSpec("separation must be >= 0")
        for n_l in self.choices:
            if not 1.0 / n_l - 1e-12 <= self.purity <= 1.0:
                raise InvalidSpec(f"purity must lie in [1/{n_l}, 1]")

    def schema(self) -> Schema:
        cols = [ColumnSpec(f"x{i}", "continuous") for i in range(self.d_con)]
        for l, n_l in enumerate(self.choices):
            cols.append(ColumnSpec(f"c{l}", "categorical", tuple(f"v{v}" for v in range(n_l))))
        return Schema(tuple(cols))


def generate(spec: SynthSpec) -> tuple[Dataset, np.ndarray]:
    """Normalized dataset (rows shuffled) and the true label of every row."""
    rng = np.random.default_rng(spec.seed)
    k, n_c = spec.k_true, spec.n_per_cluster
    n = k * n_c
    labels = np.repeat(np.arange(k), n_c)

    centers = np.column_stack([spec.separation * rng.permutation(k) for _ in range(spec.d_con)]) \
        if spec.d_con else np.zeros((k, 0))
    con = centers[labels] + rng.standard_normal((n, spec.d_con))

    cat = np.empty((n, len(spec.choices)), dtype=np.int64)
    for l, n_l in enumerate(spec.choices):
        modes = rng.permutation(n_l)[:k] if k <= n_l else rng.integers(0, n_l, size=k)
        modal = rng.random(n) < spec.purity
        shift = rng.integers(1, n_l, size=n)
        cat[:, l] = np.where(modal, modes[labels], (modes[labels] + shift) % n_l)

    order = rng.permutation(n)
    ds = Dataset(spec.schema(), con[order], cat[order])
    return normalize(ds), labels[order]


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Pair-counting ARI; 1.0 for identical partitions up to relabeling."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch("label vectors must be 1-D with equal length")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    index = _comb2(table).sum()
    rows = _comb2(table.sum(axis=1)).sum()
    cols = _comb2(table.sum(axis=0)).sum()
    total = _comb2(a.size)
    expected = rows * cols / total if total > 0 else 0.0
    maximum = (rows + cols) / 2
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))
