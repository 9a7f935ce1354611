"""Mixed-variable data model: schema, dataset, CSV/JSON ingestion, normalization.

Continuous columns are stored as a float matrix and categorical columns as a
matrix of 0-based category indices; the schema keeps the original column
order and the label text for every category.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DataError,
    EmptyDataset,
    MissingValue,
    NonNumericContinuous,
    SchemaError,
    SchemaMismatch,
    UnknownCategory,
    UnknownColumn,
)

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise SchemaError("column name must be a non-empty string")
        if self.kind == CONTINUOUS:
            if self.categories is not None:
                raise SchemaError("continuous column must not list categories", column=self.name)
        elif self.kind == CATEGORICAL:
            if self.categories is None:
                raise SchemaError("categorical column needs a category list", column=self.name)
            cats = tuple(str(c) for c in self.categories)
            if len(cats) < 2:
                raise SchemaError("categorical column needs at least 2 categories", column=self.name)
            if len(set(cats)) != len(cats):
                raise SchemaError("duplicate category labels", column=self.name)
            object.__setattr__(self, "categories", cats)
        else:
            raise SchemaError(f"unknown column kind {self.kind!r}", column=self.name)

    @property
    def n_choices(self) -> int:
        return len(self.categories) if self.categories else 0


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        cols = tuple(self.columns)
        if not cols:
            raise SchemaError("schema has no columns")
        names = [c.name for c in cols]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate column names: {dupes}")
        object.__setattr__(self, "columns", cols)

    @property
    def continuous(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.columns if c.kind == CONTINUOUS)

    @property
    def categorical(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.columns if c.kind == CATEGORICAL)

    @property
    def d_con(self) -> int:
        return len(self.continuous)

    @property
    def d_cat(self) -> int:
        return len(self.categorical)

    @property
    def m(self) -> int:
        return len(self.columns)

    @property
    def choices(self) -> tuple[int, ...]:
        """Number of categories per categorical column, in schema order."""
        return tuple(c.n_choices for c in self.categorical)

    @property
    def expanded_dim(self) -> int:
        return self.d_con + sum(self.choices)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @classmethod
    def from_dict(cls, obj: dict) -> "Schema":
        if not isinstance(obj, dict) or not isinstance(obj.get("columns"), list):
            raise SchemaError('schema must be an object with a "columns" list')
        cols = []
        for entry in obj["columns"]:
            if not isinstance(entry, dict):
                raise SchemaError("every schema column must be an object")
            unknown = set(entry) - {"name", "kind", "categories"}
            if unknown:
                raise SchemaError(f"unknown schema keys {sorted(unknown)}", column=entry.get("name"))
            cats = entry.get("categories")
            if cats is not None and not isinstance(cats, list):
                raise SchemaError("categories must be a list", column=entry.get("name"))
            cols.append(ColumnSpec(entry.get("name"), entry.get("kind"),
                                   tuple(cats) if cats is not None else None))
        return cls(tuple(cols))

    def to_dict(self) -> dict:
        out = []
        for c in self.columns:
            d = {"name": c.name, "kind": c.kind}
            if c.categories is not None:
                d["categories"] = list(c.categories)
            out.append(d)
        return {"columns": out}

    def digest(self) -> str:
        """sha256 of the canonical JSON form; identifies the schema in result files."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class MixedPoint(NamedTuple):
    """One point of the mixed space: continuous reals and category indices."""

    continuous: np.ndarray
    categorical: np.ndarray


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable mixed-variable table.

    ``ranges`` holds the observed (min, max) of each continuous column.
    ``raw_ranges`` remembers the pre-normalization ranges so prototypes can be
    reported in original units; it equals ``ranges`` for unnormalized data.
    """

    schema: Schema
    continuous: np.ndarray
    categorical: np.ndarray
    ranges: np.ndarray = field(default=None)
    raw_ranges: np.ndarray = field(default=None)

    def __post_init__(self):
        s = self.schema
        con = np.asarray(self.continuous, dtype=np.float64)
        cat = np.asarray(self.categorical, dtype=np.int64)
        # a zero-width block cannot infer its row count from reshape(-1, 0)
        n = len(con) if s.d_con else len(cat)
        try:
            con = con.reshape(n, s.d_con)
            cat = cat.reshape(n, s.d_cat)
        except ValueError:
            raise SchemaMismatch("continuous and categorical blocks do not match the schema") from None
        if con.shape[0] == 0:
            raise EmptyDataset("dataset has no rows")
        if not np.all(np.isfinite(con)):
            raise NonNumericContinuous("continuous values must be finite")
        for l, n_l in enumerate(s.choices):
            col = cat[:, l]
            if col.min() < 0 or col.max() >= n_l:
                raise UnknownCategory("category index out of range", column=s.categorical[l].name)
        if self.ranges is None:
            ranges = column_ranges(con)
        else:
            ranges = np.asarray(self.ranges, dtype=np.float64).reshape(s.d_con, 2)
            if con.size and (np.any(con < ranges[:, 0]) or np.any(con > ranges[:, 1])):
                raise DataError("ranges do not cover the stored continuous values")
        raw = ranges if self.raw_ranges is None else np.asarray(self.raw_ranges, np.float64).reshape(s.d_con, 2)
        object.__setattr__(self, "continuous", _frozen(con))
        object.__setattr__(self, "categorical", _frozen(cat))
        object.__setattr__(self, "ranges", _frozen(ranges))
        object.__setattr__(self, "raw_ranges", _frozen(raw))

    @property
    def n(self) -> int:
        return self.continuous.shape[0]

    @property
    def spans(self) -> np.ndarray:
        """Per-column range width R_k of the continuous columns."""
        return self.ranges[:, 1] - self.ranges[:, 0]

    def row(self, i: int) -> MixedPoint:
        return MixedPoint(self.continuous[i], self.categorical[i])

    def subset(self, idx: Sequence[int]) -> "Dataset":
        """Rows ``idx`` with ranges recomputed from the subset."""
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.schema, self.continuous[idx], self.categorical[idx])

    def onehot(self) -> np.ndarray:
        """Continuous columns followed by one-hot blocks, shape (n, expanded_dim)."""
        blocks = [self.continuous]
        for l, n_l in enumerate(self.schema.choices):
            blocks.append(np.eye(n_l)[self.categorical[:, l]])
        return np.hstack(blocks)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and np.array_equal(self.continuous, other.continuous)
            and np.array_equal(self.categorical, other.categorical)
            and np.array_equal(self.ranges, other.ranges)
        )

    __hash__ = None


def column_ranges(con: np.ndarray) -> np.ndarray:
    if con.shape[1] == 0:
        return np.zeros((0, 2))
    return np.column_stack([con.min(axis=0), con.max(axis=0)])


def from_records(schema: Schema, records: Iterable[Sequence]) -> Dataset:
    """Build a dataset from rows in schema column order.

    Continuous cells are numbers, categorical cells are either labels (str)
    or 0-based indices (int).
    """
    con_pos = [i for i, c in enumerate(schema.columns) if c.kind == CONTINUOUS]
    cat_pos = [i for i, c in enumerate(schema.columns) if c.kind == CATEGORICAL]
    con, cat = [], []
    for r, rec in enumerate(records, start=1):
        if len(rec) != schema.m:
            raise SchemaMismatch(f"expected {schema.m} values, got {len(rec)}", row=r)
        con.append([float(rec[i]) for i in con_pos])
        codes = []
        for i in cat_pos:
            v, spec = rec[i], schema.columns[i]
            if isinstance(v, str):
                if v not in spec.categories:
                    raise UnknownCategory(f"value {v!r} not in categories", row=r, column=spec.name)
                v = spec.categories.index(v)
            codes.append(int(v))
        cat.append(codes)
    return Dataset(schema, np.array(con, dtype=np.float64).reshape(len(con), schema.d_con),
                   np.array(cat, dtype=np.int64).reshape(len(cat), schema.d_cat))


def load_schema(path) -> Schema:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file is not valid JSON: {exc}") from exc
    return Schema.from_dict(obj)


def write_schema(schema: Schema, path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_dataset(csv_path, schema_path) -> Dataset:
    """Read a headered CSV and validate it against a JSON schema file.

    Header order may differ from the schema; values are re-ordered to the
    schema. Empty cells are rejected rather than imputed.
    """
    schema = load_schema(schema_path)
    specs = {c.name: c for c in schema.columns}
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataset("CSV file is empty")
        header = [h.strip() for h in header]
        for name in header:
            if name not in specs:
                raise UnknownColumn("column not in schema", row=0, column=name)
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise SchemaMismatch(f"CSV lacks schema columns {missing}", row=0)
        if len(set(header)) != len(header):
            raise SchemaMismatch("duplicate column in CSV header", row=0)
        order = [header.index(n) for n in schema.names]

        con_rows, cat_rows = [], []
        for r, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(cells)}", row=r)
            con, cat = [], []
            for spec, j in zip(schema.columns, order):
                raw = cells[j].strip()
                if raw == "":
                    raise MissingValue("empty cell", row=r, column=spec.name)
                if spec.kind == CONTINUOUS:
                    try:
                        v = float(raw)
                    except ValueError:
                        raise NonNumericContinuous(f"{raw!r} is not a number", row=r, column=spec.name) from None
                    if not math.isfinite(v):
                        raise NonNumericContinuous(f"{raw!r} is not finite", row=r, column=spec.name)
                    con.append(v)
                else:
                    try:
                        cat.append(spec.categories.index(raw))
                    except ValueError:
                        raise UnknownCategory(f"value {raw!r} not in categories", row=r, column=spec.name) from None
            con_rows.append(con)
            cat_rows.append(cat)
    if not con_rows:
        raise EmptyDataset("CSV has a header but no data rows")
    return Dataset(schema,
                   np.array(con_rows, dtype=np.float64).reshape(len(con_rows), schema.d_con),
                   np.array(cat_rows, dtype=np.int64).reshape(len(cat_rows), schema.d_cat))


def write_csv(ds: Dataset, path) -> None:
    """Write ``ds`` in schema column order; floats use ``repr`` so reloading is exact."""
    con_i = cat_i = 0
    getters = []
    for spec in ds.schema.columns:
        if spec.kind == CONTINUOUS:
            getters.append((CONTINUOUS, con_i, None))
            con_i += 1
        else:
            getters.append((CATEGORICAL, cat_i, spec.categories))
            cat_i += 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.schema.names)
        for i in range(ds.n):
            row = []
            for kind, j, cats in getters:
                if kind == CONTINUOUS:
                    row.append(repr(float(ds.continuous[i, j])))
                else:
                    row.append(cats[ds.categorical[i, j]])
            writer.writerow(row)


def normalize(ds: Dataset) -> Dataset:
    """Min-max scale continuous columns to [0, 1]; constant columns become 0."""
    lo = ds.ranges[:, 0]
    span = ds.spans
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (ds.continuous - lo) / safe, 0.0)
    ranges = np.column_stack([np.zeros_like(span), np.where(span > 0, 1.0, 0.0)])
    return Dataset(ds.schema, scaled, ds.categorical, ranges=ranges, raw_ranges=ds.raw_ranges)


def denormalize_values(ds: Dataset, values: np.ndarray) -> np.ndarray:
    """Map normalized continuous values back to the units of ``ds.raw_ranges``."""
    lo = ds.raw_ranges[:, 0]
    span = ds.raw_ranges[:, 1] - lo
    return lo + np.asarray(values) * span


def shape_summary(ds: Dataset) -> str:
    choices = " ".join(str(c) for c in ds.schema.choices)
    return f"n={ds.n} D_con={ds.schema.d_con} D_cat={ds.schema.d_cat} choices=[{choices}]"
