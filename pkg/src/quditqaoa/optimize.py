"""Outer-loop optimizers over the 2p circuit angles and the multi-start protocol."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

GAP_TOL = 1e-9
DEFAULT_INIT_RANGES = ((0.0, 2 * math.pi), (0.0, math.pi))


class BudgetExhausted(RuntimeError):
    pass


class ConsistencyError(RuntimeError):
    """An energy fell below the exact minimum."""


class Objective:
    """Counted, budgeted wrapper that also remembers the best point seen."""

    def __init__(self, evaluate: Callable[[np.ndarray], float], evaluation_budget: int = 10**9):
        if evaluation_budget < 1:
            raise ValueError("evaluation_budget must be >= 1")
        self.evaluate = evaluate
        self.evaluation_budget = int(evaluation_budget)
        self.evaluation_count = 0
        self.best_value = math.inf
        self.best_params: np.ndarray | None = None

    @property
    def remaining(self) -> int:
        return self.evaluation_budget - self.evaluation_count

    def __call__(self, x) -> float:
        if self.evaluation_count >= self.evaluation_budget:
            raise BudgetExhausted(f"budget of {self.evaluation_budget} evaluations used up")
        x = np.array(x, dtype=np.float64)
        self.evaluation_count += 1
        val = float(self.evaluate(x))
        if val < self.best_value:
            self.best_value, self.best_params = val, x
        return val


@dataclass
class OptRecord:
    best_params: np.ndarray
    best_value: float
    trace: list[float]
    evaluations_used: int
    seed: int | None
    wall_time: float
    method: str = ""
    flags: list[str] = field(default_factory=list)
    initial_point: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "best_params": [float(v) for v in self.best_params],
            "best_value": float(self.best_value),
            "trace": [float(v) for v in self.trace],
            "evaluations_used": int(self.evaluations_used),
            "seed": self.seed,
            "wall_time": float(self.wall_time),
            "flags": list(self.flags),
            "initial_point": None if self.initial_point is None else [float(v) for v in self.initial_point],
        }


def default_population(dim: int) -> int:
    return 4 + int(math.floor(3 * math.log(dim)))


@dataclass
class EsConfig:
    population: int | None = None
    initial_step: float = 0.3
    max_generations: int = 500
    seed: int | None = 0
    stagnation_tol: float = 1e-12
    stagnation_window: int = 50

    def __post_init__(self):
        if self.population is not None and self.population < 4:
            raise ValueError("population must be >= 4")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be > 0")


@dataclass
class QnConfig:
    fd_step: float = 1e-5
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    memory: int = 10
    seed: int | None = 0

    def __post_init__(self):
        if self.fd_step <= 0:
            raise ValueError("fd_step must be > 0")


def _result(obj: Objective, trace, seed, start, method, flags, x0) -> OptRecord:
    return OptRecord(
        best_params=np.array(obj.best_params, dtype=np.float64),
        best_value=obj.best_value,
        trace=trace,
        evaluations_used=obj.evaluation_count,
        seed=seed,
        wall_time=time.perf_counter() - start,
        method=method,
        flags=flags,
        initial_point=np.array(x0, dtype=np.float64),
    )


def es_minimize(objective: Objective, config: EsConfig | None, x0) -> OptRecord:
    """(mu/mu_w, lambda)-CMA-ES with rank-one, rank-mu and cumulative step-size updates.

    Selection uses ranks only, so iterates do not depend on a constant
    offset of the objective. Returns the best point ever evaluated.
    """
    cfg = config or EsConfig()
    start = time.perf_counter()
    mean = np.array(x0, dtype=np.float64)
    n = mean.size
    lam = cfg.population or default_population(n)
    if objective.remaining <= lam:
        raise ValueError(f"budget {objective.remaining} must exceed population {lam}")
    rng = np.random.default_rng(cfg.seed)

    mu = lam // 2
    w = np.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w**2)
    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

    sigma = cfg.initial_step
    C = np.eye(n)
    B, D = np.eye(n), np.ones(n)
    pc, ps = np.zeros(n), np.zeros(n)
    eigen_gen = 0
    trace: list[float] = []
    history: list[float] = []
    flags: list[str] = []

    for gen in range(cfg.max_generations):
        z = rng.standard_normal((lam, n))
        y = (z * D) @ B.T
        xs = mean + sigma * y
        try:
            fs = np.array([objective(x) for x in xs])
        except BudgetExhausted:
            flags.append("budget_exhausted")
            break
        trace.append(objective.best_value)
        history.append(float(fs.min()))

        order = np.argsort(fs, kind="stable")[:mu]
        y_sel = y[order]
        y_w = w @ y_sel
        mean = mean + sigma * y_w

        inv_sqrt_y = B @ ((B.T @ y_w) / D)
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * inv_sqrt_y
        ps_norm = float(np.linalg.norm(ps))
        hsig = ps_norm / math.sqrt(1 - (1 - cs) ** (2 * (gen + 1))) / chi_n < 1.4 + 2 / (n + 1)
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * y_w
        rank_mu = (y_sel.T * w) @ y_sel
        C = ((1 - c1 - cmu) * C
             + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * C)
             + cmu * rank_mu)
        sigma *= math.exp((cs / damps) * (ps_norm / chi_n - 1))

        # refresh the eigenbasis every O(n) generations
        if gen - eigen_gen > lam / (c1 + cmu) / n / 10:
            eigen_gen = gen
            C = np.triu(C) + np.triu(C, 1).T
            vals, B = np.linalg.eigh(C)
            D = np.sqrt(np.maximum(vals, 1e-300))

        # generation-best values flat over the window
        win = cfg.stagnation_window
        if len(history) >= win and np.ptp(history[-win:]) < cfg.stagnation_tol:
            flags.append("stagnation")
            break
        if not np.isfinite(sigma) or sigma * D.max() < 1e-300:
            flags.append("step_collapse")
            break
    else:
        flags.append("max_generations")
    return _result(objective, trace, cfg.seed, start, "es", flags, x0)


def fd_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient, 2n evaluations."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def qn_minimize(objective: Objective, config: QnConfig | None, initial_point) -> OptRecord:
    """L-BFGS (scipy's L-BFGS-B, no bounds) driven by central-difference gradients."""
    cfg = config or QnConfig()
    start = time.perf_counter()
    x0 = np.asarray(initial_point, dtype=np.float64)
    trace: list[float] = []
    flags: list[str] = []

    def fun(x):
        val = objective(x)
        return val, fd_gradient(objective, x, cfg.fd_step)

    try:
        res = minimize(
            fun, x0, jac=True, method="L-BFGS-B",
            callback=lambda xk: trace.append(objective.best_value),
            options={"maxcor": cfg.memory, "maxiter": cfg.max_iterations,
                     "gtol": cfg.gradient_tolerance, "ftol": 1e-15, "maxfun": 10**9},
        )
        if not res.success:
            msg = str(res.message).upper()
            flags.append("max_iterations" if "ITERATION" in msg else "line_search_failure")
    except BudgetExhausted:
        flags.append("budget_exhausted")
    if objective.best_params is None:
        raise ValueError("no evaluation was possible within the budget")
    if not trace or trace[-1] != objective.best_value:
        trace.append(objective.best_value)
    return _result(objective, trace, cfg.seed, start, "qn", flags, x0)


def run_seed(master_seed: int, run_index: int) -> np.random.SeedSequence:
    """Counter-based child seed: ``SeedSequence(master, spawn_key=(run_index,))``."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(run_index),))


def initial_point(rng: np.random.Generator, p: int, init_ranges=DEFAULT_INIT_RANGES) -> np.ndarray:
    (g0, g1), (b0, b1) = init_ranges
    return np.concatenate([rng.uniform(g0, g1, p), rng.uniform(b0, b1, p)])


def single_run(
    objective_factory: Callable[[], Objective],
    optimizer: Callable[[Objective, np.ndarray, int], OptRecord],
    run_index: int,
    p: int,
    init_ranges=DEFAULT_INIT_RANGES,
    seed: int = 0,
) -> OptRecord:
    ss = run_seed(seed, run_index)
    run_int = int(ss.generate_state(1, dtype=np.uint32)[0])
    rng = np.random.default_rng(ss)
    x0 = initial_point(rng, p, init_ranges)
    rec = optimizer(objective_factory(), x0, run_int)
    rec.seed = run_int
    return rec


def multi_start(
    objective_factory: Callable[[], Objective],
    optimizer: Callable[[Objective, np.ndarray, int], OptRecord],
    runs: int,
    init_ranges=DEFAULT_INIT_RANGES,
    seed: int = 0,
    p: int | None = None,
) -> list[OptRecord]:
    """Independent optimizations from uniform random starting angles.

    ``optimizer(objective, x0, seed)`` performs one run. ``p`` defaults to
    half the length of the factory objective's parameter vector, which must
    then be supplied as ``objective_factory.dim``.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if p is None:
        p = getattr(objective_factory, "dim") // 2
    return [single_run(objective_factory, optimizer, r, p, init_ranges, seed) for r in range(runs)]


def es_optimizer(config: EsConfig | None = None):
    base = config or EsConfig()

    def run(objective, x0, seed):
        cfg = EsConfig(base.population, base.initial_step, base.max_generations, seed,
                       base.stagnation_tol, base.stagnation_window)
        return es_minimize(objective, cfg, x0)
    return run


def qn_optimizer(config: QnConfig | None = None):
    base = config or QnConfig()

    def run(objective, x0, seed):
        cfg = QnConfig(base.fd_step, base.max_iterations, base.gradient_tolerance, base.memory, seed)
        return qn_minimize(objective, cfg, x0)
    return run


def best_of(records: Sequence[OptRecord]) -> OptRecord:
    return min(records, key=lambda r: r.best_value)


def optimality_gap(best_value: float, exact_min: float) -> float:
    gap = float(best_value) - float(exact_min)
    if gap < -GAP_TOL:
        raise ConsistencyError(f"value {best_value} lies below the exact minimum {exact_min}")
    return gap


def reduce_angles(x, gamma_period: float = 2 * math.pi, beta_period: float = 2 * math.pi) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    p = x.size // 2
    return np.concatenate([np.mod(x[:p], gamma_period), np.mod(x[p:], beta_period)])
