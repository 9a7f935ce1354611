"""DEK: K-means posed as differential-evolution search over a flattened centroid matrix.

A genome holds K centroids back to back. Each centroid is D_con continuous
slots followed, for every categorical column, by a block of N_l selection
weights; decoding takes the argmax of each block (lowest index on ties).

Points are scored against centroid j by Gower distance divided by a
logarithmic function of the centroid's separation from its nearest other
centroid, so solutions with coincident centroids are penalized.
"""
from __future__ import annotations

import math
import secrets
import time
from dataclasses import dataclass, field

import numpy as np

from . import de
from .dataset import Dataset, MixedPoint, Schema, denormalize_values
from .errors import InvalidConfig, LengthMismatch, NotEnoughCentroids, SchemaMismatch, TooFewRows
from .gower import cross_distances, gower_kernel

PENALTY = 1e9
VARIANTS = ("stabilized", "paper_literal")


@dataclass(frozen=True, eq=False)
class CentroidMatrix:
    """K prototypes in the mixed space: (K, D_con) reals and (K, D_cat) category indices."""

    continuous: np.ndarray
    categorical: np.ndarray

    def __post_init__(self):
        con = np.asarray(self.continuous, dtype=np.float64)
        cat = np.asarray(self.categorical, dtype=np.int64)
        if con.ndim != 2 or cat.ndim != 2 or con.shape[0] != cat.shape[0]:
            raise SchemaMismatch("centroid blocks must be 2-D with matching K")
        object.__setattr__(self, "continuous", con)
        object.__setattr__(self, "categorical", cat)

    @property
    def k(self) -> int:
        return self.continuous.shape[0]

    def point(self, j: int) -> MixedPoint:
        return MixedPoint(self.continuous[j], self.categorical[j])

    def check(self, schema: Schema) -> None:
        if self.continuous.shape[1] != schema.d_con or self.categorical.shape[1] != schema.d_cat:
            raise SchemaMismatch("centroid width does not match schema")
        for l, n_l in enumerate(schema.choices):
            col = self.categorical[:, l]
            if np.any(col < 0) or np.any(col >= n_l):
                raise SchemaMismatch("centroid category out of range", column=schema.categorical[l].name)

    def __eq__(self, other):
        if not isinstance(other, CentroidMatrix):
            return NotImplemented
        return (np.array_equal(self.continuous, other.continuous)
                and np.array_equal(self.categorical, other.categorical))

    __hash__ = None


def genome_length(schema: Schema, k: int) -> int:
    return k * schema.expanded_dim


def _block_edges(schema: Schema) -> list[tuple[int, int]]:
    edges, start = [], schema.d_con
    for n_l in schema.choices:
        edges.append((start, start + n_l))
        start += n_l
    return edges


def decode_batch(genomes: np.ndarray, schema: Schema, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Decode a stack of genomes (..., K * expanded_dim) into continuous and categorical blocks."""
    g = np.asarray(genomes, dtype=np.float64)
    if g.shape[-1] != genome_length(schema, k):
        raise LengthMismatch(f"genome length {g.shape[-1]} != K * expanded_dim = {genome_length(schema, k)}")
    g = g.reshape(g.shape[:-1] + (k, schema.expanded_dim))
    con = g[..., : schema.d_con]
    cats = [np.argmax(g[..., a:b], axis=-1) for a, b in _block_edges(schema)]
    cat = np.stack(cats, axis=-1) if cats else np.zeros(g.shape[:-1] + (0,), dtype=np.int64)
    return con, cat.astype(np.int64)


def decode(genome, schema: Schema, k: int) -> CentroidMatrix:
    g = np.asarray(genome, dtype=np.float64)
    if g.ndim != 1:
        raise LengthMismatch("decode expects a single flat genome")
    con, cat = decode_batch(g, schema, k)
    return CentroidMatrix(con.copy(), cat)


def encode(cm: CentroidMatrix, schema: Schema) -> np.ndarray:
    """One-hot encoding of categorical entries; inverse of :func:`decode`."""
    cm.check(schema)
    rows = []
    for j in range(cm.k):
        parts = [cm.continuous[j]]
        for l, n_l in enumerate(schema.choices):
            block = np.zeros(n_l)
            block[cm.categorical[j, l]] = 1.0
            parts.append(block)
        rows.append(np.concatenate(parts))
    return np.concatenate(rows)


def separation(con: np.ndarray, cat: np.ndarray, spans, m: int) -> np.ndarray:
    """Gower distance from each centroid to its nearest other centroid, shape (..., K)."""
    d = gower_kernel(con[..., :, None, :], cat[..., :, None, :],
                     con[..., None, :, :], cat[..., None, :, :], spans, m)
    k = con.shape[-2]
    d = np.where(np.eye(k, dtype=bool), np.inf, d)
    return d.min(axis=-1)


def _denominator(sep: np.ndarray, variant: str, eps: float):
    """ln(1 + sep) or ln(sep); entries that must be penalized come back as NaN."""
    sep = np.asarray(sep, dtype=np.float64)
    if variant == "stabilized":
        bad = sep < eps
        den = np.log1p(np.where(bad, 1.0, sep))
    elif variant == "paper_literal":
        bad = (sep < eps) | (sep == 1.0)
        den = np.log(np.where(bad, 0.5, sep))
    else:
        raise InvalidConfig(f"unknown objective variant {variant!r}")
    return np.where(bad, np.nan, den)


def phi(point: MixedPoint, centroid: MixedPoint, others, schema: Schema, ranges,
        variant: str = "stabilized", epsilon_sep: float = 1e-9) -> float:
    """Separation-aware dissimilarity of ``point`` to ``centroid``.

    ``others`` are the remaining centroids; their nearest member to
    ``centroid`` sets the separation term.
    """
    others = list(others)
    if not others:
        raise NotEnoughCentroids("phi needs at least one other centroid")
    r = np.asarray(ranges, dtype=np.float64)
    spans = r[:, 1] - r[:, 0] if r.ndim == 2 else r
    m = schema.m
    sep = min(float(gower_kernel(centroid.continuous, centroid.categorical,
                                 o.continuous, o.categorical, spans, m)) for o in others)
    den = float(_denominator(sep, variant, epsilon_sep))
    if math.isnan(den):
        return PENALTY
    d = float(gower_kernel(point.continuous, point.categorical,
                           centroid.continuous, centroid.categorical, spans, m))
    return d / den


def phi_matrix(ds: Dataset, con: np.ndarray, cat: np.ndarray, variant: str = "stabilized",
               epsilon_sep: float = 1e-9) -> np.ndarray:
    """φ for every (centroid, row) pair; shape (..., K, n)."""
    if con.shape[-2] < 2:
        raise NotEnoughCentroids("the separation term needs K >= 2")
    sep = separation(con, cat, ds.spans, ds.schema.m)
    den = _denominator(sep, variant, epsilon_sep)[..., None]
    dist = cross_distances(ds, con, cat)
    return np.where(np.isnan(den), PENALTY, dist / np.where(np.isnan(den), 1.0, den))


def objective(ds: Dataset, cm: CentroidMatrix, variant: str = "stabilized",
              epsilon_sep: float = 1e-9) -> float:
    """Sum over rows of the smallest φ to any centroid."""
    return float(phi_matrix(ds, cm.continuous, cm.categorical, variant, epsilon_sep).min(axis=-2).sum())


def empty_clusters(phi: np.ndarray) -> np.ndarray:
    """Number of centroids that attract no row under argmin-φ assignment; shape (...)."""
    k = phi.shape[-2]
    labels = np.argmin(phi, axis=-2)
    hit = labels[..., None, :] == np.arange(k)[:, None]
    return k - hit.any(axis=-1).sum(axis=-1)


def batch_objective(ds: Dataset, k: int, variant: str = "stabilized", epsilon_sep: float = 1e-9,
                    require_nonempty: bool = True):
    """Vectorized DE fitness over a population of genomes (for ``de.run(..., batch=True)``).

    The fitness is the clustering objective plus PENALTY for every centroid
    left without members when ``require_nonempty`` is set. Without that term
    the separation denominator rewards parking spare centroids far from the
    data so that a single centroid serves every row.
    """

    def f(genomes):
        con, cat = decode_batch(genomes, ds.schema, k)
        ph = phi_matrix(ds, con, cat, variant, epsilon_sep)
        value = ph.min(axis=-2).sum(axis=-1)
        if require_nonempty:
            value = value + PENALTY * empty_clusters(ph)
        return value

    return f


def assign(ds: Dataset, cm: CentroidMatrix, variant: str = "stabilized",
           epsilon_sep: float = 1e-9) -> np.ndarray:
    """argmin_j φ per row; ties go to the lowest cluster index."""
    return np.argmin(phi_matrix(ds, cm.continuous, cm.categorical, variant, epsilon_sep), axis=0)


@dataclass(frozen=True)
class DekConfig:
    k: int
    de: de.DEConfig = field(default_factory=de.DEConfig)
    variant: str = "stabilized"
    epsilon_sep: float = 1e-9
    require_nonempty: bool = True

    def __post_init__(self):
        if self.k < 2:
            raise InvalidConfig("DEK needs K >= 2 for the separation term")
        if self.variant not in VARIANTS:
            raise InvalidConfig(f"variant must be one of {VARIANTS}")
        if not self.epsilon_sep > 0:
            raise InvalidConfig("epsilon_sep must be positive")


@dataclass(eq=False)
class ClusteringResult:
    method: str
    centroids: CentroidMatrix
    assignment: np.ndarray
    objective: float
    seed: int | None = None
    runtime: float = 0.0
    params: dict = field(default_factory=dict)
    history: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.centroids.k

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def to_json(self, ds: Dataset, include_runtime: bool = False) -> dict:
        """Serializable form with human-readable centroids.

        Continuous centroid values are given both as stored (normalized) and
        mapped back to original units. Wall-clock time is left out by default
        so the artifact is reproducible byte for byte.
        """
        schema = ds.schema
        original = denormalize_values(ds, self.centroids.continuous)
        cents = []
        for j in range(self.k):
            entry, ci, ki = {}, 0, 0
            for spec in schema.columns:
                if spec.kind == "continuous":
                    entry[spec.name] = {"value": float(self.centroids.continuous[j, ci]),
                                        "original": float(original[j, ci])}
                    ci += 1
                else:
                    entry[spec.name] = spec.categories[self.centroids.categorical[j, ki]]
                    ki += 1
            cents.append(entry)
        out = {
            "method": self.method,
            "schema_sha256": schema.digest(),
            "k": self.k,
            "seed": self.seed,
            "params": self.params,
            "objective": float(self.objective),
            "centroids": cents,
            "assignment": [int(a) for a in self.assignment],
            "sizes": [int(s) for s in self.sizes],
        }
        if include_runtime:
            out["runtime_seconds"] = self.runtime
        return out


def resolve_seed(seed: int | None) -> int:
    return secrets.randbits(32) if seed is None else int(seed)


def run_dek(ds: Dataset, cfg: DekConfig, callback=None) -> ClusteringResult:
    """Cluster a normalized dataset with DEK; returns the decoded best genome."""
    if ds.n < cfg.k:
        raise TooFewRows(f"need at least K={cfg.k} rows, got {ds.n}")
    seed = resolve_seed(cfg.de.seed)
    de_cfg = de.DEConfig(**{**cfg.de.to_dict(), "seed": seed, "bounds": (0.0, 1.0)})
    t0 = time.perf_counter()
    res = de.run(de_cfg, genome_length(ds.schema, cfg.k),
                 batch_objective(ds, cfg.k, cfg.variant, cfg.epsilon_sep, cfg.require_nonempty),
                 batch=True, callback=callback)
    cm = decode(res.best_x, ds.schema, cfg.k)
    labels = assign(ds, cm, cfg.variant, cfg.epsilon_sep)
    params = {"de": de_cfg.to_dict(), "variant": cfg.variant, "epsilon_sep": cfg.epsilon_sep,
              "require_nonempty": cfg.require_nonempty, "fitness": res.best_value}
    return ClusteringResult("dek", cm, labels, objective(ds, cm, cfg.variant, cfg.epsilon_sep), seed=seed,
                            runtime=time.perf_counter() - t0, params=params, history=res.history)
