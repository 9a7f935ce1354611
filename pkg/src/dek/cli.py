"""Command-line interface: ``dek {validate,cluster,sweep-k,bench,synth}``.

Exit codes: 0 success, 1 usage or configuration error (including missing
files), 2 data error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import de
from .baselines import LINKAGES, SEEDINGS, UPDATES, HierConfig, LloydConfig, hierarchical_cluster, lloyd_cluster
from .bench import METHODS as BENCH_METHODS, BenchSpec, DatasetRef, jsonable, run_bench
from .core import VARIANTS, DekConfig, resolve_seed, run_dek
from .dataset import load_dataset, normalize, shape_summary, write_csv, write_schema
from .errors import DataError, DekError, InvalidConfig
from .gower import dump_matrix_csv
from .metrics import DISTANCES, distance_matrix, evaluate
from .selection import pick_elbow, sweep_k
from .synth import SynthSpec, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
CLUSTER_KEYS = {"method", "k", "seed", "variant", "epsilon_sep", "require_nonempty", "de",
                "seeding", "update", "max_iters", "tol", "linkage", "distance"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temp file in the target directory, then rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_via(path, writer) -> None:
    """Atomic variant of a ``writer(path)`` helper that writes a file itself."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2) + "\n"


def _load(args):
    for p in (args.data, args.schema):
        if not Path(p).is_file():
            raise UsageError(f"file not found: {p}")
    return load_dataset(args.data, args.schema)


def _read_json(path) -> dict:
    if not Path(path).is_file():
        raise UsageError(f"file not found: {path}")
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _default_jobs() -> int:
    raw = os.environ.get("DEK_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------- validate

def cmd_validate(args) -> int:
    ds = _load(args)
    print(shape_summary(ds))
    print(f"m={ds.schema.m} expanded_dim={ds.schema.expanded_dim}")
    return EXIT_OK


# ---------------------------------------------------------------- cluster

def _de_overrides(args) -> dict:
    return {k: v for k, v in {"np": args.np, "f": args.f, "cr": args.cr, "max_gs": args.max_gs,
                              "mutation": args.mutation}.items() if v is not None}


def resolve_cluster_config(args) -> dict:
    """Merge ``--config`` (a plain config or a previous output artifact) with explicit flags."""
    cfg = {}
    if args.config:
        raw = _read_json(args.config)
        cfg = dict(raw.get("config", raw))
        unknown = set(cfg) - CLUSTER_KEYS
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    for key in ("method", "k", "seed", "variant", "seeding", "update", "max_iters", "linkage", "distance"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.allow_empty:
        cfg["require_nonempty"] = False
    cfg.setdefault("method", "dek")
    cfg.setdefault("distance", "gower")
    if "k" not in cfg:
        raise UsageError("--k is required (directly or through --config)")
    if cfg["method"] not in ("dek", "lloyd", "hier"):
        raise UsageError(f"unknown method {cfg['method']!r}")
    if cfg["method"] != "hier":
        cfg["seed"] = resolve_seed(cfg.get("seed"))
    if cfg["method"] == "dek":
        de_cfg = de.DEConfig.from_dict({k: v for k, v in cfg.get("de", {}).items() if k != "seed"},
                                       **_de_overrides(args))
        cfg["de"] = {k: v for k, v in de_cfg.to_dict().items() if k not in ("seed", "bounds")}
        cfg.setdefault("variant", "stabilized")
        cfg.setdefault("epsilon_sep", 1e-9)
        cfg.setdefault("require_nonempty", True)
    elif cfg["method"] == "lloyd":
        cfg.setdefault("seeding", "uniform_random_rows")
        cfg.setdefault("update", "median_mode")
        cfg.setdefault("max_iters", 300)
        cfg.setdefault("tol", 0.0)
    else:
        cfg.setdefault("linkage", "average")
    return cfg


def run_cluster(ds, cfg: dict):
    k = int(cfg["k"])
    if cfg["method"] == "dek":
        de_cfg = de.DEConfig.from_dict(cfg["de"], seed=cfg["seed"])
        return run_dek(ds, DekConfig(k=k, de=de_cfg, variant=cfg["variant"], epsilon_sep=cfg["epsilon_sep"],
                                     require_nonempty=cfg["require_nonempty"]))
    if cfg["method"] == "lloyd":
        return lloyd_cluster(ds, LloydConfig(k=k, max_iters=cfg["max_iters"], seeding=cfg["seeding"],
                                             seed=cfg["seed"], tol=cfg["tol"], update=cfg["update"]))
    return hierarchical_cluster(ds, HierConfig(k=k, linkage=cfg["linkage"]))


def cmd_cluster(args) -> int:
    cfg = resolve_cluster_config(args)
    ds = normalize(_load(args))
    res = run_cluster(ds, cfg)
    matrix = distance_matrix(ds, cfg["distance"])
    report = evaluate(ds, res.assignment, res.centroids, cfg["distance"], matrix)
    artifact = {"config": cfg, "data_rows": ds.n, "result": res.to_json(ds), "metrics": report.to_dict()}
    if args.out:
        atomic_write(args.out, _dumps(artifact))
    if args.trace:
        if res.history is None:
            raise UsageError("--trace needs a method that records history (dek or lloyd)")
        _atomic_via(args.trace, lambda p: de.write_trace_csv(res.history, p))
    if args.dump_gower:
        _atomic_via(args.dump_gower, lambda p: dump_matrix_csv(distance_matrix(ds, "gower"), p))
    sizes = " ".join(str(int(s)) for s in res.sizes)
    print(f"method={res.method} k={res.k} seed={res.seed} objective={res.objective!r}")
    print(f"sizes=[{sizes}]")
    print(f"DBI={report.dbi:.6g} SC={report.sc:.6g} DVI={report.dvi:.6g} SSE={report.sse:.6g}"
          + (f" flags={','.join(report.flags)}" if report.flags else ""))
    return EXIT_OK


# ---------------------------------------------------------------- sweep-k

def cmd_sweep_k(args) -> int:
    ds = normalize(_load(args))
    dek_cfg = None
    if args.method == "dek":
        raw = _read_json(args.config) if args.config else {}
        raw = raw.get("config", raw)
        de_cfg = de.DEConfig.from_dict({k: v for k, v in raw.get("de", {}).items() if k != "seed"},
                                       **_de_overrides(args))
        dek_cfg = DekConfig(k=2, de=de_cfg, variant=args.variant or raw.get("variant", "stabilized"))
    curve = sweep_k(ds, args.k_min, args.k_max, args.runs, args.method, args.seed, dek_cfg, args.seeding)
    chosen = pick_elbow(curve)
    if args.out:
        atomic_write(args.out, _dumps({**curve.to_dict(), "base_seed": args.seed, "chosen_k": chosen}))
    if args.csv:
        _atomic_via(args.csv, curve.write_csv)
    for k, m, s in zip(curve.ks, curve.mean, curve.std):
        print(f"K={k} mean_sse={m:.6g} std_sse={s:.6g}")
    print(f"chosen K = {chosen}")
    return EXIT_OK


# ---------------------------------------------------------------- bench

def _parse_k(raw: str):
    if raw == "elbow":
        return raw
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f'--k must be an integer or "elbow", got {raw!r}') from None


def cmd_bench(args) -> int:
    if len(args.data) != len(args.schema):
        raise UsageError("give one --schema per --data")
    names = args.name or [Path(p).stem for p in args.data]
    if len(names) != len(args.data):
        raise UsageError("give one --name per --data")
    for p in args.data + args.schema:
        if not Path(p).is_file():
            raise UsageError(f"file not found: {p}")
    refs = tuple(DatasetRef(n, d, s) for n, d, s in zip(names, args.data, args.schema))
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    base = _read_json(args.config) if args.config else {}
    base = base.get("config", base)
    de_cfg = de.DEConfig.from_dict({k: v for k, v in base.get("de", {}).items() if k != "seed"},
                                   **_de_overrides(args))
    spec = BenchSpec(datasets=refs, methods=methods, k=_parse_k(args.k), runs=args.runs,
                     base_seed=args.seed, variant=args.variant or base.get("variant", "stabilized"),
                     de=de_cfg, require_nonempty=not args.allow_empty, distance=args.distance,
                     linkage=args.linkage)
    loaded = {r.name: r.load() for r in refs}  # data errors surface before any work starts
    progress = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    report = run_bench(spec, jobs=args.jobs, progress=progress, loaded=loaded)
    if args.out:
        atomic_write(args.out, json.dumps(report.to_dict(include_timing=args.timing), indent=2) + "\n")
    if args.csv:
        atomic_write(args.csv, report.csv_text())
    table = report.table()
    if args.table:
        atomic_write(args.table, table)
    for name, k in report.chosen_k.items():
        print(f"{name}: K = {k}")
    print(table, end="")
    return EXIT_OK


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    choices = tuple(int(c) for c in args.choices.split(",")) if args.choices else ()
    spec = SynthSpec(n_per_cluster=args.n_per_cluster, k_true=args.k_true, d_con=args.d_con, choices=choices,
                     separation=args.separation, purity=args.purity, seed=args.seed)
    ds, labels = generate(spec)
    _atomic_via(args.out, lambda p: write_csv(ds, p))
    _atomic_via(args.schema_out, lambda p: write_schema(ds.schema, p))
    if args.labels_out:
        atomic_write(args.labels_out, "label\n" + "".join(f"{int(v)}\n" for v in labels))
    print(f"wrote {ds.n} rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_data(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--schema", required=True, help="JSON schema describing every column")


def _add_de(p):
    g = p.add_argument_group("differential evolution (defaults: np=60 f=0.7 cr=0.8 max-gs=1500)")
    g.add_argument("--np", type=int, help="population size")
    g.add_argument("--f", type=float, help="mutation scale factor")
    g.add_argument("--cr", type=float, help="crossover rate")
    g.add_argument("--max-gs", type=int, dest="max_gs", help="number of generations")
    g.add_argument("--mutation", choices=de.MUTATIONS, help="mutation strategy (default rand1)")
    g.add_argument("--variant", choices=VARIANTS, help="objective variant (default stabilized)")
    g.add_argument("--allow-empty", action="store_true",
                   help="do not penalize genomes that leave a cluster empty")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dek", description="Clustering of mixed categorical and continuous data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a CSV against its schema and print its shape")
    _add_data(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("cluster", help="run one clustering and write the result as JSON")
    _add_data(p)
    p.add_argument("--method", choices=("dek", "lloyd", "hier"), help="clusterer (default dek)")
    p.add_argument("--k", type=int, help="number of clusters")
    p.add_argument("--seed", type=int, help="RNG seed; drawn at random and recorded when omitted")
    p.add_argument("--config", help="JSON config, or a previous output file to replay")
    p.add_argument("--out", help="write the result JSON here")
    p.add_argument("--trace", help="write the per-iteration best value as CSV")
    p.add_argument("--dump-gower", dest="dump_gower", help="write the n x n Gower matrix as CSV")
    p.add_argument("--distance", choices=DISTANCES, help="distance for the reported metrics (default gower)")
    _add_de(p)
    g = p.add_argument_group("baselines")
    g.add_argument("--seeding", choices=SEEDINGS, help="Lloyd initial centroids (default uniform_random_rows)")
    g.add_argument("--update", choices=UPDATES, help="Lloyd update rule (default median_mode)")
    g.add_argument("--max-iters", type=int, dest="max_iters", help="Lloyd iteration cap (default 300)")
    g.add_argument("--linkage", choices=LINKAGES, help="hierarchical linkage (default average)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep-k", help="SSE curve over a K range and the elbow choice")
    _add_data(p)
    p.add_argument("--k-min", type=int, default=2, dest="k_min", help="smallest K (default 2)")
    p.add_argument("--k-max", type=int, default=8, dest="k_max", help="largest K (default 8)")
    p.add_argument("--runs", type=int, default=5, help="runs per K (default 5)")
    p.add_argument("--method", choices=("lloyd", "dek"), default="lloyd", help="clusterer (default lloyd)")
    p.add_argument("--seed", type=int, default=0, help="base seed; run r uses seed+r (default 0)")
    p.add_argument("--seeding", choices=SEEDINGS, default="kmeans_plus_plus",
                   help="Lloyd initial centroids (default kmeans_plus_plus)")
    p.add_argument("--config", help="JSON config supplying DE settings for --method dek")
    p.add_argument("--out", help="write the curve and chosen K as JSON")
    p.add_argument("--csv", help="write the curve as CSV (k, mean_sse, std_sse)")
    _add_de(p)
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("bench", help="repeated seeded runs per dataset and method")
    p.add_argument("--data", action="append", required=True, help="CSV file; repeat for several datasets")
    p.add_argument("--schema", action="append", required=True, help="schema for the matching --data")
    p.add_argument("--name", action="append", help="display name for the matching --data (default file stem)")
    p.add_argument("--methods", default="dek,lloyd",
                   help=f"comma-separated subset of {','.join(BENCH_METHODS)} (default dek,lloyd)")
    p.add_argument("--k", default="elbow", help='number of clusters or "elbow" (default elbow)')
    p.add_argument("--runs", type=int, default=20, help="runs per dataset and method (default 20)")
    p.add_argument("--seed", type=int, default=0, help="base seed; run r uses seed+r (default 0)")
    p.add_argument("--config", help="JSON config supplying DE settings")
    p.add_argument("--distance", choices=DISTANCES, default="gower", help="metric distance (default gower)")
    p.add_argument("--linkage", choices=LINKAGES, default="average", help="linkage for hier (default average)")
    p.add_argument("--jobs", type=int, default=_default_jobs(),
                   help="worker processes (default from DEK_JOBS, else 1)")
    p.add_argument("--out", help="write the full report as JSON")
    p.add_argument("--csv", help="write the aggregate table as CSV")
    p.add_argument("--table", help="write the aligned text table")
    p.add_argument("--timing", action="store_true", help="include wall-clock seconds per run in the JSON")
    p.add_argument("--verbose", action="store_true", help="report progress on stderr")
    _add_de(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a planted-partition dataset")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--schema-out", required=True, dest="schema_out", help="schema JSON output path")
    p.add_argument("--labels-out", dest="labels_out", help="true labels CSV output path")
    p.add_argument("--n-per-cluster", type=int, default=100, dest="n_per_cluster", help="rows per cluster (default 100)")
    p.add_argument("--k-true", type=int, default=3, dest="k_true", help="number of planted clusters (default 3)")
    p.add_argument("--d-con", type=int, default=4, dest="d_con", help="continuous columns (default 4)")
    p.add_argument("--choices", default="4,4,4", help="comma-separated category counts (default 4,4,4)")
    p.add_argument("--separation", type=float, default=6.0, help="center spacing in noise std units (default 6)")
    p.add_argument("--purity", type=float, default=0.95, help="probability of the modal category (default 0.95)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidConfig, FileNotFoundError) as exc:
        print(f"dek: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"dek: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DekError, Exception) as exc:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"dek: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
