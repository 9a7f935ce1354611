"""Repeated seeded runs per (dataset, method) with a comparison table.

Run r of every (dataset, method) pair uses seed ``base_seed + r``. A run
that raises is kept in the report with its error message and left out of
the aggregates.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import de
from .baselines import HierConfig, LloydConfig, hierarchical_cluster, lloyd_cluster
from .core import DekConfig, run_dek
from .dataset import Dataset, load_dataset, normalize
from .errors import InvalidConfig
from .metrics import MetricReport, distance_matrix, evaluate
from .selection import pick_elbow, sweep_k

METHODS = ("dek", "lloyd", "lloyd++", "hier")
METRICS = ("dbi", "sc", "dvi")
HIGHER_IS_BETTER = {"dbi": False, "sc": True, "dvi": True, "sse": False}
LABELS = {"dbi": "DBI", "sc": "SC", "dvi": "DVI"}


@dataclass(frozen=True)
class DatasetRef:
    name: str
    csv_path: str
    schema_path: str

    def load(self) -> Dataset:
        return normalize(load_dataset(self.csv_path, self.schema_path))


@dataclass(frozen=True)
class BenchSpec:
    datasets: tuple
    methods: tuple = ("dek", "lloyd")
    k: int | str = "elbow"
    runs: int = 20
    base_seed: int = 0
    variant: str = "stabilized"
    de: de.DEConfig = field(default_factory=de.DEConfig)
    require_nonempty: bool = True
    distance: str = "gower"
    linkage: str = "average"
    elbow_range: tuple = (2, 8)
    elbow_runs: int = 5

    def __post_init__(self):
        if self.runs < 1:
            raise InvalidConfig("runs must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise InvalidConfig(f"unknown methods {bad}; choose from {METHODS}")
        if self.k != "elbow" and (not isinstance(self.k, int) or self.k < 2):
            raise InvalidConfig('k must be an integer >= 2 or "elbow"')

    def to_dict(self) -> dict:
        return {"datasets": [d.name for d in self.datasets], "methods": list(self.methods), "k": self.k,
                "runs": self.runs, "base_seed": self.base_seed, "variant": self.variant,
                "de": self.de.to_dict(), "require_nonempty": self.require_nonempty,
                "distance": self.distance, "linkage": self.linkage,
                "elbow_range": list(self.elbow_range), "elbow_runs": self.elbow_runs}


@dataclass
class RunRecord:
    run: int
    seed: int
    metrics: MetricReport | None
    error: str | None = None
    wall: float = 0.0

    @property
    def ok(self) -> bool:
        return self.metrics is not None


@dataclass
class MethodResult:
    dataset: str
    method: str
    k: int
    runs: list

    def values(self, metric: str) -> np.ndarray:
        return np.array([getattr(r.metrics, metric) for r in self.runs if r.ok], dtype=np.float64)

    def aggregate(self, metric: str) -> dict:
        v = self.values(metric)
        if v.size == 0:
            return {"mean": math.nan, "std": math.nan, "best": math.nan}
        with np.errstate(invalid="ignore"):
            best = v.max() if HIGHER_IS_BETTER[metric] else v.min()
            return {"mean": float(v.mean()), "std": float(v.std()), "best": float(best)}

    @property
    def failed(self) -> int:
        return sum(not r.ok for r in self.runs)


@dataclass
class RunReport:
    spec: dict
    chosen_k: dict
    elbow_curves: dict
    results: list

    def result(self, dataset: str, method: str) -> MethodResult:
        for r in self.results:
            if r.dataset == dataset and r.method == method:
                return r
        raise KeyError((dataset, method))

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {"spec": self.spec, "chosen_k": self.chosen_k, "elbow_curves": self.elbow_curves, "results": []}
        for res in self.results:
            runs = []
            for r in res.runs:
                entry = {"run": r.run, "seed": r.seed,
                         "metrics": r.metrics.to_dict() if r.ok else None, "error": r.error}
                if include_timing:
                    entry["wall_seconds"] = r.wall
                runs.append(entry)
            out["results"].append({
                "dataset": res.dataset, "method": res.method, "k": res.k, "failed": res.failed,
                "aggregate": {m: res.aggregate(m) for m in METRICS + ("sse",)},
                "runs": runs,
            })
        return jsonable(out)

    def _rows(self):
        methods = list(dict.fromkeys(r.method for r in self.results))
        datasets = list(dict.fromkeys(r.dataset for r in self.results))
        return methods, datasets

    def table(self) -> str:
        """Aligned text table: one row per (dataset, metric), mean±std per method, best mean starred."""
        methods, datasets = self._rows()
        header = ["Dataset", "Metric"] + [m.upper() for m in methods]
        lines = []
        for d in datasets:
            for metric in METRICS:
                aggs = [self.result(d, m).aggregate(metric) for m in methods]
                means = np.array([a["mean"] for a in aggs])
                best = _best_index(means, HIGHER_IS_BETTER[metric])
                cells = []
                for i, a in enumerate(aggs):
                    cell = f"{a['mean']:.4f}±{a['std']:.4f}"
                    cells.append(cell + ("*" if i == best else ""))
                lines.append([d if metric == METRICS[0] else "", LABELS[metric]] + cells)
        widths = [max(len(str(row[i])) for row in [header] + lines) for i in range(len(header))]
        fmt = lambda row: "  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip()
        out = [fmt(header), fmt(["-" * w for w in widths])] + [fmt(r) for r in lines]
        failures = [f"{r.dataset}/{r.method}: {r.failed} failed run(s)" for r in self.results if r.failed]
        if failures:
            out.append("")
            out.extend(failures)
        return "\n".join(out) + "\n"

    def csv_text(self) -> str:
        methods, datasets = self._rows()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "method", "k", "metric", "mean", "std", "best", "is_best", "failed"])
        for d in datasets:
            for metric in METRICS:
                means = np.array([self.result(d, m).aggregate(metric)["mean"] for m in methods])
                best = _best_index(means, HIGHER_IS_BETTER[metric])
                for i, m in enumerate(methods):
                    res = self.result(d, m)
                    a = res.aggregate(metric)
                    w.writerow([d, m, res.k, metric, repr(a["mean"]), repr(a["std"]), repr(a["best"]),
                                int(i == best), res.failed])
        return buf.getvalue()


def _best_index(means: np.ndarray, higher: bool):
    ok = np.isfinite(means) if not higher else ~np.isnan(means)
    if not ok.any():
        return None
    masked = np.where(ok, means, -np.inf if higher else np.inf)
    return int(np.argmax(masked) if higher else np.argmin(masked))


def jsonable(obj):
    """Replace non-finite floats with the strings "inf", "-inf", "nan" for strict JSON."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def cluster_with(ds: Dataset, method: str, k: int, seed: int, spec: BenchSpec, matrix=None):
    if method == "dek":
        de_cfg = de.DEConfig(**{**spec.de.to_dict(), "seed": seed})
        return run_dek(ds, DekConfig(k=k, de=de_cfg, variant=spec.variant,
                                     require_nonempty=spec.require_nonempty))
    if method in ("lloyd", "lloyd++"):
        seeding = "kmeans_plus_plus" if method == "lloyd++" else "uniform_random_rows"
        return lloyd_cluster(ds, LloydConfig(k=k, seed=seed, seeding=seeding))
    if method == "hier":
        return hierarchical_cluster(ds, HierConfig(k=k, linkage=spec.linkage), matrix=matrix)
    raise InvalidConfig(f"unknown method {method!r}")


def _one_run(args):
    ds, matrix, method, k, run, seed, spec = args
    t0 = time.perf_counter()
    try:
        res = cluster_with(ds, method, k, seed, spec,
                           matrix=matrix if spec.distance == "gower" else None)
        rep = evaluate(ds, res.assignment, res.centroids, spec.distance, matrix)
        return RunRecord(run, seed, rep, None, time.perf_counter() - t0)
    except Exception as exc:  # recorded, never fatal for the bench
        return RunRecord(run, seed, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0)


def run_bench(spec: BenchSpec, jobs: int = 1, progress=None, loaded: dict | None = None) -> RunReport:
    """Execute ``spec.runs`` seeded runs for every (dataset, method) pair.

    ``loaded`` may map dataset names to already-normalized datasets.
    ``progress`` is called with a short message after each unit of work.
    """
    chosen_k, curves, tasks, order = {}, {}, [], []
    for ref in spec.datasets:
        ds = loaded[ref.name] if loaded and ref.name in loaded else ref.load()
        if spec.k == "elbow":
            lo, hi = spec.elbow_range
            curve = sweep_k(ds, lo, min(hi, ds.n), spec.elbow_runs, "lloyd", spec.base_seed)
            k = pick_elbow(curve)
            curves[ref.name] = curve.to_dict()
        else:
            k = spec.k
        chosen_k[ref.name] = k
        matrix = distance_matrix(ds, spec.distance)
        for method in spec.methods:
            order.append((ref.name, method, k))
            for r in range(spec.runs):
                tasks.append((ds, matrix, method, k, r, spec.base_seed + r, spec))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_one_run, tasks))
    else:
        records = []
        for t in tasks:
            records.append(_one_run(t))
            if progress:
                progress(f"{t[2]} run {t[4]} done")

    results, i = [], 0
    for name, method, k in order:
        results.append(MethodResult(name, method, k, records[i:i + spec.runs]))
        i += spec.runs
    return RunReport(jsonable(spec.to_dict()), chosen_k, curves, results)


def default_refs(names=None) -> list[DatasetRef]:
    """Bundled public datasets (currently the Statlog heart data)."""
    data = Path(__file__).parent / "data"
    bundled = {"Heart": DatasetRef("Heart", str(data / "heart.csv"), str(data / "heart.schema.json"))}
    names = names or list(bundled)
    return [bundled[n] for n in names]
