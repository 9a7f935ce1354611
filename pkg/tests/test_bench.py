import json

import numpy as np
import pytest

from dek import de
from dek.bench import BenchSpec, DatasetRef, default_refs, jsonable, run_bench
from dek.dataset import write_csv, write_schema
from dek.errors import InvalidConfig
from dek.synth import SynthSpec, generate


@pytest.fixture(scope="module")
def planted_ref(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    ds, _ = generate(SynthSpec(n_per_cluster=20, seed=2))
    write_csv(ds, d / "p.csv")
    write_schema(ds.schema, d / "p.json")
    return DatasetRef("planted", str(d / "p.csv"), str(d / "p.json"))


def _spec(ref, **kw):
    base = dict(datasets=(ref,), methods=("dek", "lloyd"), k=3, runs=3, de=de.DEConfig(max_gs=15))
    base.update(kw)
    return BenchSpec(**base)


def test_spec_validation(planted_ref):
    with pytest.raises(InvalidConfig):
        _spec(planted_ref, runs=0)
    with pytest.raises(InvalidConfig):
        _spec(planted_ref, methods=("kmodes",))
    with pytest.raises(InvalidConfig):
        _spec(planted_ref, k="auto")


def test_single_run_aggregates(planted_ref):
    rep = run_bench(_spec(planted_ref, runs=1))
    for res in rep.results:
        run = res.runs[0]
        for m in ("dbi", "sc", "dvi"):
            agg = res.aggregate(m)
            assert agg["mean"] == agg["best"] == getattr(run.metrics, m)
            assert agg["std"] == 0.0


def test_seeds_and_aggregates(planted_ref):
    rep = run_bench(_spec(planted_ref, base_seed=10))
    for res in rep.results:
        assert [r.seed for r in res.runs] == [10, 11, 12]
        v = np.array([r.metrics.sc for r in res.runs])
        agg = res.aggregate("sc")
        assert abs(agg["mean"] - v.mean()) <= 1e-12 and abs(agg["std"] - v.std()) <= 1e-12
        assert agg["best"] == v.max()
        assert res.aggregate("dbi")["best"] == min(r.metrics.dbi for r in res.runs)


def test_determinism_and_json(planted_ref):
    a = run_bench(_spec(planted_ref))
    b = run_bench(_spec(planted_ref))
    ja, jb = json.dumps(a.to_dict()), json.dumps(b.to_dict())
    assert ja == jb
    assert "wall_seconds" not in ja
    assert "wall_seconds" in json.dumps(a.to_dict(include_timing=True))
    assert a.table() == b.table() and a.csv_text() == b.csv_text()


def test_table_layout(planted_ref):
    rep = run_bench(_spec(planted_ref, methods=("dek", "lloyd", "hier")))
    lines = rep.table().splitlines()
    assert lines[0].split() == ["Dataset", "Metric", "DEK", "LLOYD", "HIER"]
    rows = [l for l in lines[2:] if l.strip()]
    assert [r.split()[-4] for r in rows] == ["DBI", "SC", "DVI"]
    for r in rows:
        assert r.count("±") == 3 and r.count("*") == 1
    csv_lines = rep.csv_text().splitlines()
    assert csv_lines[0] == "dataset,method,k,metric,mean,std,best,is_best,failed"
    assert len(csv_lines) == 1 + 3 * 3


def test_failed_runs_are_recorded(planted_ref, monkeypatch):
    import dek.bench as bench

    real = bench.cluster_with

    def flaky(ds, method, k, seed, spec, matrix=None):
        if method == "lloyd" and seed == 1:
            raise RuntimeError("boom")
        return real(ds, method, k, seed, spec, matrix)

    monkeypatch.setattr(bench, "cluster_with", flaky)
    rep = run_bench(_spec(planted_ref))
    res = rep.result("planted", "lloyd")
    assert res.failed == 1 and len(res.runs) == 3
    assert res.runs[1].error == "RuntimeError: boom"
    ok = [r.metrics.sc for r in res.runs if r.ok]
    assert res.aggregate("sc")["mean"] == pytest.approx(np.mean(ok), abs=1e-12)
    assert "planted/lloyd: 1 failed run(s)" in rep.table()
    assert rep.to_dict()["results"][1]["runs"][1]["metrics"] is None


def test_elbow_k(planted_ref):
    rep = run_bench(_spec(planted_ref, k="elbow", methods=("lloyd",), runs=2))
    assert rep.chosen_k == {"planted": 3}
    assert rep.elbow_curves["planted"]["points"][0]["k"] == 2


def test_parallel_matches_serial(planted_ref):
    spec = _spec(planted_ref, runs=2)
    assert json.dumps(run_bench(spec, jobs=2).to_dict()) == json.dumps(run_bench(spec).to_dict())


def test_jsonable():
    assert jsonable({"a": [float("inf"), float("nan"), np.float64(-np.inf), np.int64(3)]}) == \
        {"a": ["inf", "nan", "-inf", 3]}


def test_default_refs():
    (heart,) = default_refs()
    assert heart.name == "Heart" and heart.load().n == 270
