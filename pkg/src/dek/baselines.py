"""Comparison clusterers: Gower-Lloyd K-means (uniform or K-means++ seeding)
and agglomerative clustering over the pairwise Gower matrix."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import CentroidMatrix, ClusteringResult, resolve_seed
from .dataset import Dataset
from .errors import InvalidConfig, TooFewRows
from .gower import cross_distances, gower_kernel, pairwise_matrix

SEEDINGS = ("uniform_random_rows", "kmeans_plus_plus")
UPDATES = ("median_mode", "euclidean_onehot")
LINKAGES = ("single", "complete", "average")


@dataclass(frozen=True)
class LloydConfig:
    k: int
    max_iters: int = 300
    seeding: str = "uniform_random_rows"
    seed: int | None = None
    tol: float = 0.0
    update: str = "median_mode"

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig("K must be >= 1")
        if self.max_iters < 1:
            raise InvalidConfig("max_iters must be >= 1")
        if self.seeding not in SEEDINGS:
            raise InvalidConfig(f"seeding must be one of {SEEDINGS}")
        if self.update not in UPDATES:
            raise InvalidConfig(f"update must be one of {UPDATES}")
        if self.tol < 0:
            raise InvalidConfig("tol must be >= 0")


@dataclass(frozen=True)
class HierConfig:
    k: int
    linkage: str = "average"

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig("K must be >= 1")
        if self.linkage not in LINKAGES:
            raise InvalidConfig(f"linkage must be one of {LINKAGES}")


def prototypes(ds: Dataset, labels: np.ndarray, k: int, fallback: CentroidMatrix | None = None) -> CentroidMatrix:
    """Per-cluster continuous medians and categorical modes (lowest index on ties).

    Empty clusters take their row from ``fallback`` when given, else the
    whole-data prototype.
    """
    con = np.empty((k, ds.schema.d_con))
    cat = np.empty((k, ds.schema.d_cat), dtype=np.int64)
    for j in range(k):
        members = labels == j
        if not members.any():
            if fallback is not None:
                con[j], cat[j] = fallback.continuous[j], fallback.categorical[j]
                continue
            members = np.ones(ds.n, dtype=bool)
        con[j] = np.median(ds.continuous[members], axis=0) if ds.schema.d_con else con[j]
        for l, n_l in enumerate(ds.schema.choices):
            cat[j, l] = np.bincount(ds.categorical[members, l], minlength=n_l).argmax()
    return CentroidMatrix(con, cat)


def _pick_indices(n: int, k: int, rng: np.random.Generator, dist_to) -> list[int]:
    chosen = [int(rng.integers(n))]
    nearest = dist_to(chosen[0]) ** 2
    while len(chosen) < k:
        total = nearest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=nearest / total))
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, dist_to(nxt) ** 2)
        nearest[chosen] = 0.0
    return chosen


def kmeans_pp_indices(ds: Dataset, k: int, rng: np.random.Generator) -> list[int]:
    """Row indices chosen by D^2 sampling under Gower distance."""
    if ds.n < k:
        raise TooFewRows(f"need at least K={k} rows, got {ds.n}")

    def dist_to(i):
        return gower_kernel(ds.continuous, ds.categorical, ds.continuous[i], ds.categorical[i],
                            ds.spans, ds.schema.m)

    return _pick_indices(ds.n, k, rng, dist_to)


def kmeans_pp_seed(ds: Dataset, k: int, rng: np.random.Generator) -> CentroidMatrix:
    idx = kmeans_pp_indices(ds, k, rng)
    return CentroidMatrix(ds.continuous[idx].copy(), ds.categorical[idx].copy())


def _initial_rows(ds: Dataset, cfg: LloydConfig, rng) -> list[int]:
    if cfg.seeding == "kmeans_plus_plus":
        return kmeans_pp_indices(ds, cfg.k, rng)
    return [int(i) for i in rng.choice(ds.n, size=cfg.k, replace=False)]


class _GowerSpace:
    """Centroids as CentroidMatrix, distance = Gower, update = median/mode."""

    def __init__(self, ds):
        self.ds = ds

    def init(self, rows):
        return CentroidMatrix(self.ds.continuous[rows].copy(), self.ds.categorical[rows].copy())

    def distances(self, c):
        return cross_distances(self.ds, c.continuous, c.categorical)

    def cost(self, dmin):
        return dmin

    def update(self, labels, c):
        return prototypes(self.ds, labels, c.k, fallback=c)

    def replace(self, c, j, row):
        con, cat = c.continuous.copy(), c.categorical.copy()
        con[j], cat[j] = self.ds.continuous[row], self.ds.categorical[row]
        return CentroidMatrix(con, cat)

    def movement(self, a, b):
        d = gower_kernel(a.continuous, a.categorical, b.continuous, b.categorical,
                         self.ds.spans, self.ds.schema.m)
        return float(np.max(d))

    def to_mixed(self, c):
        return c


class _OneHotSpace:
    """Centroids in one-hot-expanded space, squared Euclidean cost, mean update."""

    def __init__(self, ds):
        self.ds = ds
        self.x = ds.onehot()

    def init(self, rows):
        return self.x[rows].copy()

    def distances(self, c):
        return np.sqrt(((c[:, None, :] - self.x[None, :, :]) ** 2).sum(axis=-1))

    def cost(self, dmin):
        return dmin ** 2

    def update(self, labels, c):
        out = c.copy()
        for j in range(c.shape[0]):
            members = labels == j
            if members.any():
                out[j] = self.x[members].mean(axis=0)
        return out

    def replace(self, c, j, row):
        c = c.copy()
        c[j] = self.x[row]
        return c

    def movement(self, a, b):
        return float(np.max(np.sqrt(((a - b) ** 2).sum(axis=-1))))

    def to_mixed(self, c):
        s = self.ds.schema
        con = c[:, : s.d_con]
        cats, start = [], s.d_con
        for n_l in s.choices:
            cats.append(np.argmax(c[:, start:start + n_l], axis=1))
            start += n_l
        cat = np.stack(cats, axis=1) if cats else np.zeros((c.shape[0], 0), dtype=np.int64)
        return CentroidMatrix(con.copy(), cat)


def _assign_with_repair(space, c, k):
    """Nearest-centroid labels; an empty cluster's centroid jumps to the row
    farthest from its nearest centroid, one empty cluster at a time."""
    while True:
        d = space.distances(c)
        labels = np.argmin(d, axis=0)
        dmin = d[labels, np.arange(d.shape[1])]
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0 or dmin.max() <= 0:
            return c, labels, dmin
        c = space.replace(c, int(empty[0]), int(np.argmax(dmin)))


def lloyd_cluster(ds: Dataset, cfg: LloydConfig) -> ClusteringResult:
    """Alternate nearest-centroid assignment and prototype update until the
    assignment stops changing, centroid movement drops to ``tol``, or
    ``max_iters`` is reached.

    ``history`` on the result holds the clustering cost after each assignment
    step; with the median/mode update it never increases.
    """
    if ds.n < cfg.k:
        raise TooFewRows(f"need at least K={cfg.k} rows, got {ds.n}")
    seed = resolve_seed(cfg.seed)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    space = _GowerSpace(ds) if cfg.update == "median_mode" else _OneHotSpace(ds)
    c = space.init(_initial_rows(ds, cfg, rng))
    history, converged, it = [], False, 0
    state = None  # (centroids, labels, dmin) behind the last recorded cost
    stop = False
    for it in range(1, cfg.max_iters + 2):
        step = _assign_with_repair(space, c, cfg.k)
        cost = float(space.cost(step[2]).sum())
        if state is not None and cost > history[-1]:
            # equally optimal prototypes can differ by rounding; keep the cheaper state
            converged = True
            break
        same = state is not None and np.array_equal(step[1], state[1])
        state = step
        history.append(cost)
        if same or stop:
            converged = True
            break
        if it > cfg.max_iters:
            break  # budget spent; the last assignment above matches the final centroids
        new = space.update(state[1], state[0])
        stop = cfg.tol > 0 and space.movement(new, state[0]) <= cfg.tol
        c = new
    it = min(it, cfg.max_iters)
    c, labels, dmin = state
    params = {"k": cfg.k, "seeding": cfg.seeding, "update": cfg.update, "max_iters": cfg.max_iters,
              "tol": cfg.tol, "iterations": it, "converged": converged}
    return ClusteringResult("lloyd", space.to_mixed(c), labels, float(space.cost(dmin).sum()), seed=seed,
                            runtime=time.perf_counter() - t0, params=params, history=np.array(history))


def agglomerate(matrix: np.ndarray, k: int, linkage: str = "average") -> tuple[np.ndarray, list]:
    """Merge clusters bottom-up on a precomputed distance matrix until ``k`` remain.

    The closest pair is taken in row-major order, so ties go to the lowest
    (i, j). Returns labels numbered by each cluster's smallest member and the
    list of merges as (i, j, distance).
    """
    if linkage not in LINKAGES:
        raise InvalidConfig(f"linkage must be one of {LINKAGES}")
    n = matrix.shape[0]
    if n < k:
        raise TooFewRows(f"need at least K={k} rows, got {n}")
    w = np.array(matrix, dtype=np.float64, copy=True)
    np.fill_diagonal(w, np.inf)
    size = np.ones(n)
    owner = np.arange(n)
    merges = []
    for _ in range(n - k):
        flat = int(np.argmin(w))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        d = float(w[i, j])
        if linkage == "single":
            row = np.minimum(w[i], w[j])
        elif linkage == "complete":
            row = np.maximum(w[i], w[j])
        else:
            row = (size[i] * w[i] + size[j] * w[j]) / (size[i] + size[j])
        w[i, :] = row
        w[:, i] = row
        w[i, i] = np.inf
        w[j, :] = np.inf
        w[:, j] = np.inf
        size[i] += size[j]
        owner[owner == j] = i
        merges.append((i, j, d))
    _, labels = np.unique(owner, return_inverse=True)
    return labels.astype(np.int64), merges


def hierarchical_cluster(ds: Dataset, cfg: HierConfig, matrix: np.ndarray | None = None) -> ClusteringResult:
    if ds.n < cfg.k:
        raise TooFewRows(f"need at least K={cfg.k} rows, got {ds.n}")
    t0 = time.perf_counter()
    if matrix is None:
        matrix = pairwise_matrix(ds)
    labels, merges = agglomerate(matrix, cfg.k, cfg.linkage)
    cm = prototypes(ds, labels, cfg.k)
    d = cross_distances(ds, cm.continuous, cm.categorical)
    obj = float(d[labels, np.arange(ds.n)].sum())
    params = {"k": cfg.k, "linkage": cfg.linkage}
    return ClusteringResult("hier", cm, labels, obj, runtime=time.perf_counter() - t0, params=params)
