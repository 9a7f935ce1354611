"""Bound-constrained differential evolution (DE/rand/1/bin) over real vectors.

Generations are synchronous: every trial vector of generation G is built
from the population P^G, all trials are evaluated, then greedy one-to-one
selection produces P^(G+1).

Random draws come from one ``numpy.random.Generator`` per run, in this order:

* initialization: ``rng.random((Np, D))``
* each generation:
    1. donor keys ``rng.random((Np, Np))``; row i with its own slot masked is
       argsorted and the first three indices are r1, r2, r3
    2. crossover uniforms ``rng.random((Np, D))``
    3. forced coordinates ``rng.integers(0, D, size=Np)``

Fixing the seed therefore fixes the full trajectory.
"""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import InvalidConfig, ObjectiveNonFinite

MUTATIONS = ("rand1", "best1")


@dataclass(frozen=True)
class DEConfig:
    """Control parameters; defaults follow the published DEK settings."""

    np: int = 60
    f: float = 0.7
    cr: float = 0.8
    max_gs: int = 1500
    bounds: tuple = (0.0, 1.0)
    seed: int | None = None
    mutation: str = "rand1"

    def __post_init__(self):
        if int(self.np) != self.np or self.np < 4:
            raise InvalidConfig(f"np must be an integer >= 4, got {self.np}")
        if not 0.0 <= self.f <= 1.0:
            raise InvalidConfig(f"f must lie in [0, 1], got {self.f}")
        if not 0.0 <= self.cr <= 1.0:
            raise InvalidConfig(f"cr must lie in [0, 1], got {self.cr}")
        if int(self.max_gs) != self.max_gs or self.max_gs < 1:
            raise InvalidConfig(f"max_gs must be an integer >= 1, got {self.max_gs}")
        if self.mutation not in MUTATIONS:
            raise InvalidConfig(f"mutation must be one of {MUTATIONS}, got {self.mutation!r}")
        lo, hi = np.asarray(self.bounds, dtype=np.float64).T
        if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidConfig("bounds must be finite with low <= high")

    def resolve_bounds(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        """Expand ``bounds`` into per-dimension low/high vectors of length ``dim``."""
        b = np.asarray(self.bounds, dtype=np.float64)
        if b.shape == (2,):
            b = np.tile(b, (dim, 1))
        if b.shape != (dim, 2):
            raise InvalidConfig(f"bounds shape {b.shape} does not match dimension {dim}")
        return b[:, 0].copy(), b[:, 1].copy()

    @classmethod
    def from_dict(cls, obj: dict, **overrides) -> "DEConfig":
        """Build from config-file keys ``np, f, cr, max_gs, seed, mutation``."""
        known = {"np", "f", "cr", "max_gs", "seed", "mutation", "bounds"}
        unknown = set(obj) - known
        if unknown:
            raise InvalidConfig(f"unknown DE config keys: {sorted(unknown)}")
        kw = {k: obj[k] for k in obj}
        if "bounds" in kw:
            kw["bounds"] = tuple(map(tuple, kw["bounds"])) if np.ndim(kw["bounds"]) == 2 else tuple(kw["bounds"])
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def to_dict(self) -> dict:
        b = np.asarray(self.bounds).tolist()
        return {"np": self.np, "f": self.f, "cr": self.cr, "max_gs": self.max_gs,
                "seed": self.seed, "mutation": self.mutation, "bounds": b}


@dataclass
class DEState:
    population: np.ndarray
    values: np.ndarray
    generation: int
    best_x: np.ndarray
    best_value: float
    low: np.ndarray
    high: np.ndarray
    rng: np.random.Generator = field(repr=False)

    @property
    def size(self) -> int:
        return self.population.shape[0]

    @property
    def dim(self) -> int:
        return self.population.shape[1]


class DERunResult(NamedTuple):
    best_x: np.ndarray
    best_value: float
    history: np.ndarray
    state: DEState


def _evaluate(objective, pop: np.ndarray, batch: bool) -> np.ndarray:
    if batch:
        vals = np.asarray(objective(pop), dtype=np.float64).reshape(-1)
        if vals.shape[0] != pop.shape[0]:
            raise ValueError("batch objective returned the wrong number of values")
    else:
        vals = np.array([float(objective(x)) for x in pop])
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise ObjectiveNonFinite(f"objective returned {vals[bad]} for population member {bad}")
    return vals


def initialize(cfg: DEConfig, dim: int, objective: Callable, batch: bool = False) -> DEState:
    """Uniform random population inside the bounds, evaluated; generation 1."""
    if dim < 1:
        raise InvalidConfig("dimension must be >= 1")
    lo, hi = cfg.resolve_bounds(dim)
    rng = np.random.default_rng(cfg.seed)
    pop = lo + (hi - lo) * rng.random((cfg.np, dim))
    vals = _evaluate(objective, pop, batch)
    b = int(np.argmin(vals))
    return DEState(pop, vals, 1, pop[b].copy(), float(vals[b]), lo, hi, rng)


def differential(base, a, b, f, low, high) -> np.ndarray:
    """``base + f * (a - b)`` clamped into [low, high]."""
    return np.clip(base + f * (a - b), low, high)


def draw_donors(rng: np.random.Generator, size: int) -> np.ndarray:
    """Three mutually distinct donor indices per slot, none equal to the slot itself."""
    keys = rng.random((size, size))
    np.fill_diagonal(keys, np.inf)
    return np.argsort(keys, axis=1, kind="stable")[:, :3]


def mutate(state: DEState, i: int, f: float, mutation: str = "rand1", donors=None) -> np.ndarray:
    """Mutant vector for slot ``i``.

    ``donors`` pins (r1, r2, r3); otherwise they are drawn from the state's
    generator. ``best1`` replaces the base vector with the best-so-far.
    """
    if donors is None:
        keys = state.rng.random(state.size)
        keys[i] = np.inf
        donors = np.argsort(keys, kind="stable")[:3]
    r1, r2, r3 = (int(r) for r in donors)
    if len({i, r1, r2, r3}) != 4:
        raise ValueError("donor indices must be distinct from each other and from the target")
    pop = state.population
    base = state.best_x if mutation == "best1" else pop[r1]
    return differential(base, pop[r2], pop[r3], f, state.low, state.high)


def crossover(target, mutant, cr: float, rng: np.random.Generator) -> np.ndarray:
    """Binomial crossover; one uniform per coordinate, then the forced index."""
    target = np.asarray(target, dtype=np.float64)
    mutant = np.asarray(mutant, dtype=np.float64)
    if target.shape != mutant.shape:
        raise ValueError("target and mutant dimensions differ")
    d = target.shape[-1]
    take = rng.random(target.shape) <= cr
    j_rand = rng.integers(0, d, size=target.shape[:-1])
    np.put_along_axis(take, np.asarray(j_rand)[..., None], True, axis=-1)
    return np.where(take, mutant, target)


def make_trials(state: DEState, f: float, cr: float, mutation: str = "rand1") -> np.ndarray:
    """All trial vectors of one generation, drawn in the documented order."""
    pop = state.population
    donors = draw_donors(state.rng, state.size)
    base = state.best_x[None, :] if mutation == "best1" else pop[donors[:, 0]]
    mutants = differential(base, pop[donors[:, 1]], pop[donors[:, 2]], f, state.low, state.high)
    return crossover(pop, mutants, cr, state.rng)


def select_and_step(state: DEState, objective: Callable, f: float = 0.7, cr: float = 0.8,
                    mutation: str = "rand1", batch: bool = False) -> DEState:
    """One generation: trials, evaluation, greedy selection (ties keep the trial)."""
    trials = make_trials(state, f, cr, mutation)
    trial_vals = _evaluate(objective, trials, batch)
    keep = trial_vals <= state.values
    pop = np.where(keep[:, None], trials, state.population)
    vals = np.where(keep, trial_vals, state.values)
    b = int(np.argmin(vals))
    best_x, best_value = state.best_x, state.best_value
    if vals[b] < best_value:
        best_x, best_value = pop[b].copy(), float(vals[b])
    return dataclasses.replace(state, population=pop, values=vals, generation=state.generation + 1,
                               best_x=best_x, best_value=best_value)


def run(cfg: DEConfig, dim: int, objective: Callable, batch: bool = False,
        callback: Callable[[DEState], None] | None = None) -> DERunResult:
    """Run exactly ``cfg.max_gs`` generations; ``history[g]`` is the best value after generation g+1.

    ``callback`` sees the initial state and every subsequent state.
    """
    state = initialize(cfg, dim, objective, batch)
    if callback is not None:
        callback(state)
    history = np.empty(cfg.max_gs)
    for g in range(cfg.max_gs):
        state = select_and_step(state, objective, cfg.f, cfg.cr, cfg.mutation, batch)
        history[g] = state.best_value
        if callback is not None:
            callback(state)
    return DERunResult(state.best_x.copy(), state.best_value, history, state)


def write_trace_csv(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "best_value"])
        for g, v in enumerate(history, start=1):
            w.writerow([g, repr(float(v))])
