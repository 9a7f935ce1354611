"""Gower distance on mixed continuous/categorical points."""
from __future__ import annotations

import numpy as np

from .dataset import Dataset, MixedPoint, Schema
from .errors import SchemaMismatch

__all__ = [
    "MixedPoint",
    "gower_distance",
    "gower_kernel",
    "cross_distances",
    "pairwise_matrix",
    "dump_matrix_csv",
]


def gower_kernel(a_con, a_cat, b_con, b_cat, spans, m):
    """Broadcasting Gower distance; the last axis of every operand is the column axis.

    Continuous terms are accumulated in column order, categorical mismatches
    are counted as an integer and added once, so every caller (scalar,
    pairwise, batched) gets bit-identical values. Zero-range columns
    contribute 0.
    """
    cont = 0.0
    for k, span in enumerate(spans):
        if span > 0:
            cont = cont + _term(a_con[..., k], b_con[..., k], span)
    mismatches = 0
    for l in range(a_cat.shape[-1]):
        mismatches = mismatches + (a_cat[..., l] != b_cat[..., l])
    return _finish(cont, mismatches, m)


def _term(a, b, span):
    t = np.abs(np.subtract(a, b))
    return t if span == 1.0 else t / span


def _finish(cont, mismatches, m):
    return np.clip(np.asarray(cont + mismatches, dtype=np.float64) / m, 0.0, 1.0)


def _spans(ranges) -> np.ndarray:
    r = np.asarray(ranges, dtype=np.float64)
    if r.ndim == 2:
        return r[:, 1] - r[:, 0]
    return r


def gower_distance(a: MixedPoint, b: MixedPoint, schema: Schema, ranges) -> float:
    """Average per-column dissimilarity between two points.

    ``ranges`` is either an (D_con, 2) array of (min, max) or a vector of
    range widths.
    """
    spans = _spans(ranges)
    parts = (np.asarray(a.continuous), np.asarray(a.categorical),
             np.asarray(b.continuous), np.asarray(b.categorical))
    if (parts[0].shape != (schema.d_con,) or parts[2].shape != (schema.d_con,)
            or parts[1].shape != (schema.d_cat,) or parts[3].shape != (schema.d_cat,)
            or spans.shape != (schema.d_con,)):
        raise SchemaMismatch("point does not conform to schema")
    for cats in (parts[1], parts[3]):
        for l, n_l in enumerate(schema.choices):
            if not 0 <= cats[l] < n_l:
                raise SchemaMismatch("category index out of range", column=schema.categorical[l].name)
    return float(gower_kernel(*parts, spans, schema.m))


def cross_distances(ds: Dataset, c_con: np.ndarray, c_cat: np.ndarray) -> np.ndarray:
    """Distances from every row of ``ds`` to a stack of centroids.

    ``c_con`` has shape (..., K, D_con) and ``c_cat`` (..., K, D_cat); the
    result has shape (..., K, n). Mismatch counts come from a product of
    one-hot matrices (exact small integers), which keeps the result identical
    to :func:`gower_kernel`.
    """
    c_cat = np.asarray(c_cat)
    cols = np.ascontiguousarray(np.moveaxis(np.asarray(c_con, dtype=np.float64), -1, 0))[..., None]
    data = np.ascontiguousarray(ds.continuous.T)
    cont = 0.0
    for k, span in enumerate(ds.spans):
        if span > 0:
            t = np.subtract(cols[k], data[k])
            np.abs(t, out=t)
            if span != 1.0:
                t /= span
            if isinstance(cont, float):
                cont = t
            else:
                cont += t
    mismatches = 0
    if ds.schema.d_cat:
        onehot_c = _onehot(c_cat, ds.schema.choices)
        matches = onehot_c @ _onehot(ds.categorical, ds.schema.choices).T
        mismatches = ds.schema.d_cat - matches.astype(np.int64)
    return _finish(cont, mismatches, ds.schema.m)


def _onehot(cat: np.ndarray, choices) -> np.ndarray:
    blocks = [np.eye(n_l)[cat[..., l]] for l, n_l in enumerate(choices)]
    return np.concatenate(blocks, axis=-1)


def pairwise_matrix(ds: Dataset) -> np.ndarray:
    """Full n x n Gower matrix; row i is computed against all rows at once."""
    out = np.empty((ds.n, ds.n))
    for i in range(ds.n):
        out[i] = gower_kernel(ds.continuous[i], ds.categorical[i],
                              ds.continuous, ds.categorical, ds.spans, ds.schema.m)
    return out


def dump_matrix_csv(matrix: np.ndarray, path) -> None:
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g")
