"""Choosing the cluster count from the SSE-versus-K curve."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import de
from .baselines import LloydConfig, lloyd_cluster
from .core import DekConfig, run_dek
from .dataset import Dataset
from .errors import CurveTooShort, InvalidConfig, InvalidRange
from .metrics import sse

METHODS = ("dek", "lloyd")


@dataclass
class SseCurve:
    ks: list
    mean: list
    std: list
    best: list
    runs_per_k: int
    method: str

    def to_dict(self) -> dict:
        return {"method": self.method, "runs_per_k": self.runs_per_k,
                "points": [{"k": k, "mean_sse": m, "std_sse": s, "best_sse": b}
                           for k, m, s, b in zip(self.ks, self.mean, self.std, self.best)]}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "mean_sse", "std_sse"])
            for k, m, s in zip(self.ks, self.mean, self.std):
                w.writerow([k, repr(m), repr(s)])


def _cluster_once(ds, k, method, seed, dek_template, lloyd_seeding):
    if method == "lloyd":
        res = lloyd_cluster(ds, LloydConfig(k=k, seed=seed, seeding=lloyd_seeding))
    else:
        base = dek_template or DekConfig(k=2)
        de_cfg = de.DEConfig(**{**base.de.to_dict(), "seed": seed})
        res = run_dek(ds, DekConfig(k=k, de=de_cfg, variant=base.variant, epsilon_sep=base.epsilon_sep,
                                    require_nonempty=base.require_nonempty))
    return sse(ds, res.assignment, res.centroids, "gower")


def sweep_k(ds: Dataset, k_min: int, k_max: int, runs_per_k: int = 5, method: str = "lloyd",
            base_seed: int = 0, dek_config: DekConfig | None = None,
            lloyd_seeding: str = "kmeans_plus_plus") -> SseCurve:
    """Gower SSE of ``runs_per_k`` seeded runs at every K in [k_min, k_max].

    Run r at every K uses seed ``base_seed + r``. ``dek_config`` supplies the
    DE settings for ``method="dek"`` (its K and seed are overridden).
    """
    if not (2 <= k_min < k_max <= ds.n):
        raise InvalidRange(f"need 2 <= k_min < k_max <= n, got k_min={k_min}, k_max={k_max}, n={ds.n}")
    if runs_per_k < 1:
        raise InvalidConfig("runs_per_k must be >= 1")
    if method not in METHODS:
        raise InvalidConfig(f"method must be one of {METHODS}")
    ks, mean, std, best = [], [], [], []
    for k in range(k_min, k_max + 1):
        vals = np.array([_cluster_once(ds, k, method, base_seed + r, dek_config, lloyd_seeding)
                         for r in range(runs_per_k)])
        ks.append(k)
        mean.append(float(vals.mean()))
        std.append(float(vals.std()))
        best.append(float(vals.min()))
    return SseCurve(ks, mean, std, best, runs_per_k, method)


def pick_elbow(curve: SseCurve, stat: str = "mean") -> int:
    """Interior K with the largest second difference of SSE; ties go to the smaller K."""
    values = np.asarray(getattr(curve, stat), dtype=np.float64)
    if values.size < 3:
        raise CurveTooShort("elbow selection needs at least 3 points")
    drops = values[:-1] - values[1:]
    second = drops[:-1] - drops[1:]
    return int(curve.ks[1 + int(np.argmax(second))])
