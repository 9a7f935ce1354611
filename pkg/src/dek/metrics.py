"""Internal validity indices (Davies-Bouldin, silhouette, Dunn) and SSE.

All indices ignore empty clusters. Distances are Gower by default; the
``euclidean_onehot`` mode works on one-hot-expanded rows with cluster means
as prototypes, which matches the textbook continuous-data definitions.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import prototypes
from .core import CentroidMatrix, encode
from .dataset import Dataset
from .errors import DegenerateCentroids, InvalidConfig, TooFewClusters, ZeroDiameter
from .gower import cross_distances, gower_kernel, pairwise_matrix

DISTANCES = ("gower", "euclidean_onehot")


@dataclass
class MetricReport:
    dbi: float
    sc: float
    dvi: float
    sse: float
    k_effective: int
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_distance(kind):
    if kind not in DISTANCES:
        raise InvalidConfig(f"distance must be one of {DISTANCES}")


def _groups(labels) -> list[np.ndarray]:
    labels = np.asarray(labels)
    return [np.flatnonzero(labels == c) for c in np.unique(labels)]


def distance_matrix(ds: Dataset, kind: str = "gower") -> np.ndarray:
    _check_distance(kind)
    if kind == "gower":
        return pairwise_matrix(ds)
    x = ds.onehot()
    sq = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=-1)
    return np.sqrt(sq)


def davies_bouldin(ds: Dataset, labels, distance: str = "gower") -> float:
    """Mean over clusters of the worst (S_i + S_j) / M_ij ratio.

    S_i is the mean distance of members to their prototype; M_ij the distance
    between prototypes. Coinciding prototypes give +inf and a
    :class:`DegenerateCentroids` warning.
    """
    _check_distance(distance)
    groups = _groups(labels)
    if len(groups) < 2:
        raise TooFewClusters("Davies-Bouldin needs at least 2 nonempty clusters")
    k = len(groups)
    compact = np.empty(k)
    if distance == "gower":
        relabel = np.empty(ds.n, dtype=np.int64)
        for c, g in enumerate(groups):
            relabel[g] = c
        cm = prototypes(ds, relabel, k)
        to_proto = cross_distances(ds, cm.continuous, cm.categorical)
        for c, g in enumerate(groups):
            compact[c] = to_proto[c, g].mean()
        sep = gower_kernel(cm.continuous[:, None, :], cm.categorical[:, None, :],
                           cm.continuous[None, :, :], cm.categorical[None, :, :], ds.spans, ds.schema.m)
    else:
        x = ds.onehot()
        means = np.array([x[g].mean(axis=0) for g in groups])
        for c, g in enumerate(groups):
            compact[c] = np.sqrt(((x[g] - means[c]) ** 2).sum(axis=1)).mean()
        sep = np.sqrt(((means[:, None, :] - means[None, :, :]) ** 2).sum(axis=-1))
    off = ~np.eye(k, dtype=bool)
    if np.any(sep[off] == 0):
        warnings.warn("two cluster prototypes coincide", DegenerateCentroids, stacklevel=2)
        return float("inf")
    ratio = np.where(off, (compact[:, None] + compact[None, :]) / np.where(off, sep, 1.0), -np.inf)
    return float(ratio.max(axis=1).mean())


def silhouette(matrix: np.ndarray, labels) -> float:
    """Mean silhouette width; members of singleton clusters score 0."""
    labels = np.asarray(labels)
    groups = _groups(labels)
    if len(groups) < 2:
        raise TooFewClusters("silhouette needs at least 2 nonempty clusters")
    n = labels.shape[0]
    # mean distance from every point to every cluster
    means = np.column_stack([matrix[:, g].sum(axis=1) for g in groups])
    sizes = np.array([g.size for g in groups], dtype=np.float64)
    own = np.searchsorted(np.unique(labels), labels)
    own_size = sizes[own]
    a = np.where(own_size > 1, means[np.arange(n), own] / np.maximum(own_size - 1, 1), 0.0)
    other = means / sizes
    other[np.arange(n), own] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own_size > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def dunn(matrix: np.ndarray, labels) -> float:
    """Smallest between-cluster distance over largest cluster diameter.

    All-zero diameters give +inf with a :class:`ZeroDiameter` warning.
    """
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise TooFewClusters("Dunn needs at least 2 nonempty clusters")
    same = labels[:, None] == labels[None, :]
    inter = matrix[~same].min()
    diameter = matrix[same].max()
    if diameter <= 0:
        warnings.warn("every cluster has zero diameter", ZeroDiameter, stacklevel=2)
        return float("inf")
    return float(inter / diameter)


def sse(ds: Dataset, labels, centroids: CentroidMatrix | np.ndarray | None = None,
        distance: str = "gower") -> float:
    """Sum of squared distances from rows to their cluster's centroid.

    Without ``centroids`` the per-cluster optimum prototype for the chosen
    distance is used: median/mode for Gower, the mean of one-hot rows for
    ``euclidean_onehot``. For ``euclidean_onehot`` explicit centroids may be
    a (K, expanded_dim) array or a CentroidMatrix (one-hot encoded first).
    """
    _check_distance(distance)
    labels = np.asarray(labels)
    k = int(labels.max()) + 1
    if distance == "gower":
        cm = prototypes(ds, labels, k) if centroids is None else centroids
        d = cross_distances(ds, cm.continuous, cm.categorical)[labels, np.arange(ds.n)]
        return float((d ** 2).sum())
    x = ds.onehot()
    if centroids is None:
        c = np.zeros((k, x.shape[1]))
        for j in range(k):
            members = labels == j
            if members.any():
                c[j] = x[members].mean(axis=0)
    elif isinstance(centroids, CentroidMatrix):
        c = encode(centroids, ds.schema).reshape(centroids.k, -1)
    else:
        c = np.asarray(centroids, dtype=np.float64)
    return float(((x - c[labels]) ** 2).sum())


def evaluate(ds: Dataset, labels, centroids: CentroidMatrix | None = None, distance: str = "gower",
             matrix: np.ndarray | None = None) -> MetricReport:
    """All four metrics at once. Raises :class:`TooFewClusters` when fewer than
    two clusters are nonempty; degenerate infinities are recorded in ``flags``."""
    labels = np.asarray(labels)
    if matrix is None:
        matrix = distance_matrix(ds, distance)
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dbi = davies_bouldin(ds, labels, distance)
        sc = silhouette(matrix, labels)
        dvi = dunn(matrix, labels)
    for w in caught:
        if issubclass(w.category, (DegenerateCentroids, ZeroDiameter)):
            flags.append(w.category.__name__)
    return MetricReport(dbi=dbi, sc=sc, dvi=dvi, sse=sse(ds, labels, centroids, distance),
                        k_effective=len(np.unique(labels)), flags=flags)
