"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test records a one-line PASS/FAIL verdict that is printed in a
summary section at the end of the pytest session.
"""
import json
import math
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

import oracles
from conftest import make_schema, random_dataset, random_labels, record_criterion
from dek import de
from dek.baselines import LloydConfig, lloyd_cluster
from dek.bench import BenchSpec, default_refs, run_bench
from dek.core import CentroidMatrix, DekConfig, decode, encode, genome_length, objective, run_dek
from dek.dataset import Dataset, normalize
from dek.metrics import davies_bouldin, distance_matrix, dunn, evaluate, silhouette, sse
from dek.selection import pick_elbow, sweep_k
from dek.synth import SynthSpec, adjusted_rand_index, generate


def _mixed_points(rng, n, m):
    """n normalized points over m columns, with duplicates, a constant column and near-duplicates."""
    d_con = int(rng.integers(1, m))
    choices = tuple(int(c) for c in rng.integers(2, 6, size=m - d_con))
    schema = make_schema(d_con, choices)
    con = rng.random((n, d_con))
    con[:, 0] = 0.25  # constant column: range zero
    cat = np.column_stack([rng.integers(0, c, size=n) for c in choices]) if choices else np.zeros((n, 0), int)
    # a tenth of the rows duplicate earlier rows, some differing only in the constant column
    dup = rng.choice(n // 2, size=n // 10, replace=False)
    con[n - len(dup):] = con[dup]
    cat[n - len(dup):] = cat[dup]
    return normalize(Dataset(schema, con, cat))


def test_criterion_01_gower_metric_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    checks = []
    for m in (2, 9, 17, 30):  # 4 x 250 = 1000 points
        ds = _mixed_points(rng, 250, m)
        d = distance_matrix(ds)
        sym = np.array_equal(d, d.T)
        rng_ok = bool(np.all((d >= 0) & (d <= 1)))
        worst = max(float((d - (d[:, j, None] + d[j, None, :])).max()) for j in range(ds.n))
        live = ds.spans > 0
        same = np.all(ds.continuous[:, None, live] == ds.continuous[None, :, live], axis=-1) & \
            np.all(ds.categorical[:, None, :] == ds.categorical[None, :, :], axis=-1)
        ident = np.array_equal(d == 0.0, same)
        checks.append((sym, rng_ok, worst <= 1e-12, ident, worst))
    elapsed = time.perf_counter() - t0
    ok = all(all(c[:4]) for c in checks) and elapsed < 5.0
    record_criterion(1, "Gower metric suite", ok,
                     f"max triangle excess {max(c[4] for c in checks):.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_02_encode_decode_roundtrip():
    rng = np.random.default_rng(2)
    rt = 0
    for _ in range(100):
        choices = tuple(int(c) for c in rng.integers(2, 7, size=int(rng.integers(1, 5))))
        schema = make_schema(int(rng.integers(0, 5)), choices)
        k = int(rng.integers(1, 6))
        cm = CentroidMatrix(rng.random((k, schema.d_con)),
                            np.column_stack([rng.integers(0, c, size=k) for c in choices]))
        rt += decode(encode(cm, schema), schema, k) == cm
    inv = 0
    for _ in range(100):
        choices = tuple(int(c) for c in rng.integers(2, 7, size=int(rng.integers(1, 5))))
        schema = make_schema(int(rng.integers(0, 5)), choices)
        k = int(rng.integers(1, 6))
        g = rng.random(genome_length(schema, k))
        h = g.copy()
        for j in range(k):
            start = j * schema.expanded_dim + schema.d_con
            for n_l in choices:
                h[start:start + n_l] *= rng.uniform(1e-3, 1e3)
                start += n_l
        inv += decode(g, schema, k) == decode(h, schema, k)
    ok = rt == 100 and inv == 100
    record_criterion(2, "encode/decode roundtrip", ok, f"roundtrip {rt}/100, rescale-invariant {inv}/100")
    assert ok


def test_criterion_03_de_engine():
    t0 = time.perf_counter()
    f = lambda P: (P * P).sum(axis=1)
    hits, elitism, monotone = 0, True, True
    for seed in range(20):
        prev = []

        def watch(state):
            nonlocal elitism
            if prev and np.any(state.values > prev[0]):
                elitism = False
            prev[:] = [state.values.copy()]

        res = de.run(de.DEConfig(np=60, f=0.7, cr=0.8, max_gs=1500, seed=seed, bounds=(-5.0, 5.0)),
                     10, f, batch=True, callback=watch)
        monotone &= bool(np.all(np.diff(res.history) <= 0))
        hits += res.best_value < 1e-3
    elapsed = time.perf_counter() - t0
    ok = hits >= 19 and elitism and monotone and elapsed < 30.0
    record_criterion(3, "DE engine", ok, f"sphere < 1e-3 in {hits}/20, elitism={elitism}, "
                     f"monotone={monotone}, {elapsed:.1f}s")
    assert ok


def test_criterion_04_objective_oracle():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        ds = random_dataset(rng, int(rng.integers(2, 21)))
        k = int(rng.integers(2, 4))
        cm = decode(rng.random(genome_length(ds.schema, k)), ds.schema, k)
        ref = oracles.dek_objective(ds, cm.continuous.tolist(), cm.categorical.tolist())
        worst = max(worst, abs(objective(ds, cm) - ref))
    ok = worst <= 1e-12
    record_criterion(4, "objective oracle", ok, f"max abs error {worst:.2e} over 50 instances")
    assert ok


def test_criterion_05_metric_oracles():
    rng = np.random.default_rng(5)
    worst, in_range = 0.0, True
    for _ in range(50):
        n = int(rng.integers(4, 41))
        ds = random_dataset(rng, n)
        labels = random_labels(rng, n, int(rng.integers(2, min(6, n))))
        d = oracles.gower_matrix(ds)
        m = distance_matrix(ds)
        k = int(labels.max()) + 1
        protos = [oracles.median_mode(ds, np.flatnonzero(labels == c)) for c in range(k)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pairs = [
                (davies_bouldin(ds, labels), oracles.davies_bouldin(ds, labels)),
                (silhouette(m, labels), oracles.silhouette(d, labels)),
                (dunn(m, labels), oracles.dunn(d, labels)),
                (sse(ds, labels), oracles.sse_gower(ds, labels, *zip(*protos))),
            ]
        for ours, ref in pairs:
            if math.isinf(ref) and ours == ref:
                continue
            worst = max(worst, abs(ours - ref))
    for _ in range(200):  # fuzz inputs, including tiny and degenerate ones
        n = int(rng.integers(2, 25))
        ds = random_dataset(rng, n, int(rng.integers(1, 3)), (2,))
        labels = random_labels(rng, n, int(rng.integers(2, n + 1)))
        rep = evaluate(ds, labels)
        in_range &= -1.0 <= rep.sc <= 1.0 and rep.dbi >= 0 and rep.dvi >= 0
    ok = worst <= 1e-9 and in_range
    record_criterion(5, "metric oracles", ok, f"max abs error {worst:.2e}, ranges hold={in_range}")
    assert ok


@pytest.mark.slow
def test_criterion_06_planted_recovery():
    t0 = time.perf_counter()
    dek_hits = lloyd_hits = 0
    for seed in range(20):
        ds, truth = generate(SynthSpec(n_per_cluster=100, k_true=3, d_con=4, choices=(4, 4, 4),
                                       separation=6.0, purity=0.95, seed=seed))
        res = run_dek(ds, DekConfig(k=3, de=de.DEConfig(seed=seed)))
        dek_hits += adjusted_rand_index(truth, res.assignment) >= 0.9
        res = lloyd_cluster(ds, LloydConfig(k=3, seed=seed, seeding="kmeans_plus_plus"))
        lloyd_hits += adjusted_rand_index(truth, res.assignment) >= 0.9
    elapsed = time.perf_counter() - t0
    ok = dek_hits >= 18 and lloyd_hits >= 16 and elapsed < 300.0
    record_criterion(6, "planted-partition recovery", ok,
                     f"DEK {dek_hits}/20, Lloyd++ {lloyd_hits}/20 with ARI >= 0.9, {elapsed:.0f}s")
    assert ok


def test_criterion_07_elbow():
    picks = []
    for seed in range(20):
        ds, _ = generate(SynthSpec(seed=seed))
        picks.append(pick_elbow(sweep_k(ds, 2, 8, runs_per_k=5, method="lloyd", base_seed=seed)))
    hits = picks.count(3)
    ok = hits >= 18
    record_criterion(7, "elbow picks planted K", ok, f"K=3 in {hits}/20 sweeps")
    assert ok


@pytest.mark.slow
def test_criterion_08_heart_direction():
    t0 = time.perf_counter()
    rep = run_bench(BenchSpec(datasets=tuple(default_refs(["Heart"])), methods=("dek", "lloyd"),
                              k="elbow", runs=20, base_seed=0))
    elapsed = time.perf_counter() - t0
    k = rep.chosen_k["Heart"]
    dek_r, km_r = rep.result("Heart", "dek"), rep.result("Heart", "lloyd")
    sc_d, sc_k = dek_r.aggregate("sc")["mean"], km_r.aggregate("sc")["mean"]
    dbi_d, dbi_k = dek_r.aggregate("dbi")["mean"], km_r.aggregate("dbi")["mean"]
    sc_ok, dbi_ok = sc_d > sc_k + 0.05, dbi_d < dbi_k
    ok = sc_ok and dbi_ok and elapsed < 900.0 and dek_r.failed == 0 and km_r.failed == 0
    record_criterion(8, "Heart direction vs Gower-Lloyd", ok,
                     f"K={k}; SC DEK {sc_d:.4f} vs KM {sc_k:.4f} (need gap > 0.05: {sc_ok}); "
                     f"DBI DEK {dbi_d:.4f} vs KM {dbi_k:.4f} (need lower: {dbi_ok}); {elapsed:.0f}s")
    assert ok


def test_criterion_09_lloyd_descent():
    rng = np.random.default_rng(9)
    descent = early = 0
    for _ in range(100):
        ds = random_dataset(rng, int(rng.integers(10, 80)))
        k = int(rng.integers(2, 7))
        cfg = LloydConfig(k=k, seed=int(rng.integers(1 << 31)))
        res = lloyd_cluster(ds, cfg)
        descent += bool(np.all(np.diff(res.history) <= 0))
        early += res.params["iterations"] < cfg.max_iters
    ok = descent == 100 and early >= 95
    record_criterion(9, "Gower-Lloyd descent", ok, f"non-increasing {descent}/100, early stop {early}/100")
    assert ok


def _cli(args, cwd):
    proc = subprocess.run([sys.executable, "-m", "dek.cli", *args], cwd=cwd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def test_criterion_10_cli_determinism(tmp_path):
    data = ["--data", "s.csv", "--schema", "s.json"]
    # (arguments, files to compare); "{o}" is replaced by a per-execution name
    invocations = {
        "synth": (["synth", "--out", "s.csv", "--schema-out", "s.json", "--labels-out", "{o}", "--seed", "7"],
                  ["{o}", "s.csv", "s.json"]),
        "cluster-dek": (["cluster", *data, "--k", "3", "--seed", "3", "--max-gs", "60", "--out", "{o}",
                         "--trace", "{o}.trace"], ["{o}", "{o}.trace"]),
        "cluster-lloyd": (["cluster", *data, "--method", "lloyd", "--k", "3", "--seed", "3",
                           "--seeding", "kmeans_plus_plus", "--out", "{o}"], ["{o}"]),
        "cluster-hier": (["cluster", *data, "--method", "hier", "--k", "3", "--out", "{o}",
                          "--dump-gower", "{o}.gower"], ["{o}", "{o}.gower"]),
        "sweep-k": (["sweep-k", *data, "--seed", "3", "--out", "{o}", "--csv", "{o}.csv"], ["{o}", "{o}.csv"]),
        "bench": (["bench", *data, "--runs", "3", "--k", "3", "--seed", "3", "--max-gs", "30",
                   "--methods", "dek,lloyd,lloyd++,hier", "--out", "{o}", "--csv", "{o}.csv",
                   "--table", "{o}.txt"], ["{o}", "{o}.csv", "{o}.txt"]),
    }
    identical = []
    for name, (args, files) in invocations.items():
        outs = []
        for rep in ("a", "b"):
            target = f"{name}.{rep}"
            stdout = _cli([a.replace("{o}", target) for a in args], tmp_path)
            outs.append([stdout] + [(tmp_path / f.replace("{o}", target)).read_bytes() for f in files])
        identical.append(outs[0] == outs[1])
    # replay: the embedded config of a result reproduces it byte for byte
    _cli(["cluster", *data, "--config", "cluster-dek.a", "--out", "replay"], tmp_path)
    replay = (tmp_path / "replay").read_bytes() == (tmp_path / "cluster-dek.a").read_bytes()
    ok = all(identical) and replay
    record_criterion(10, "CLI determinism", ok,
                     f"{sum(identical)}/{len(identical)} invocations bit-identical, replay identical={replay}")
    assert ok
