import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dek.dataset import ColumnSpec, Dataset, Schema, load_dataset, normalize  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "dek" / "data"
HEART_CSV = DATA / "heart.csv"
HEART_SCHEMA = DATA / "heart.schema.json"


def make_schema(d_con, choices):
    cols = [ColumnSpec(f"x{i}", "continuous") for i in range(d_con)]
    cols += [ColumnSpec(f"c{l}", "categorical", tuple(f"v{v}" for v in range(n))) for l, n in enumerate(choices)]
    return Schema(tuple(cols))


def random_dataset(rng, n, d_con=None, choices=None, normalized=True):
    if d_con is None:
        d_con = int(rng.integers(1, 4))
    if choices is None:
        choices = tuple(int(c) for c in rng.integers(2, 5, size=int(rng.integers(1, 4))))
    schema = make_schema(d_con, choices)
    con = rng.normal(size=(n, d_con)) * rng.uniform(0.5, 5.0, size=d_con)
    cat = np.column_stack([rng.integers(0, c, size=n) for c in choices]) if choices else np.zeros((n, 0), int)
    ds = Dataset(schema, con, cat)
    return normalize(ds) if normalized else ds


def random_labels(rng, n, k):
    """Labels covering 0..k-1 with every cluster nonempty."""
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    return rng.permutation(labels)


@pytest.fixture(scope="session")
def heart():
    return normalize(load_dataset(HEART_CSV, HEART_SCHEMA))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


def record_criterion(number, title, passed, detail):
    """Remember one acceptance verdict; printed together at the end of the session."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}  ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
