"""Depth sweep comparing the two optimizers on one cost diagonal."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from quditqaoa.encoding import DiagonalHamiltonian
from quditqaoa.optimize import (
    DEFAULT_INIT_RANGES,
    GAP_TOL,
    EsConfig,
    Objective,
    QnConfig,
    es_optimizer,
    multi_start,
    optimality_gap,
    qn_optimizer,
)
from quditqaoa.qaoa import CircuitObjective


@dataclass
class SweepPoint:
    seed: int
    p: int
    es_gap: float
    es_evaluations: int
    qn_gap: float | None = None
    qn_evaluations: int | None = None
    qn_budget_per_run: int | None = None


@dataclass
class DepthStudy:
    """Best-of-``es_runs`` ES vs best-of-``qn_runs`` QN gaps per (seed, p).

    With ``match_evaluations`` each QN run may use at most
    ``ceil(total ES evaluations / qn_runs)`` circuit evaluations, so both
    optimizers spend the same total budget at every depth.
    """

    cost: DiagonalHamiltonian
    depths: tuple[int, ...] = (1, 2, 3, 4, 5)
    qn_depths: tuple[int, ...] = (3, 4, 5)
    es_runs: int = 50
    qn_runs: int = 300
    es_config: EsConfig = field(default_factory=EsConfig)
    qn_config: QnConfig = field(default_factory=QnConfig)
    match_evaluations: bool = True
    init_ranges: tuple = DEFAULT_INIT_RANGES

    def run_seed(self, seed: int, log=None) -> list[SweepPoint]:
        circuit = CircuitObjective(self.cost)
        exact = self.cost.min
        out = []
        for p in self.depths:
            es = multi_start(lambda: Objective(circuit), es_optimizer(self.es_config),
                             self.es_runs, self.init_ranges, seed, p)
            used = sum(r.evaluations_used for r in es)
            pt = SweepPoint(seed, p, optimality_gap(min(r.best_value for r in es), exact), used)
            if p in self.qn_depths:
                budget = math.ceil(used / self.qn_runs) if self.match_evaluations else 10**9
                qn = multi_start(lambda: Objective(circuit, budget), qn_optimizer(self.qn_config),
                                 self.qn_runs, self.init_ranges, seed, p)
                pt.qn_gap = optimality_gap(min(r.best_value for r in qn), exact)
                pt.qn_evaluations = sum(r.evaluations_used for r in qn)
                pt.qn_budget_per_run = budget if self.match_evaluations else None
            if log:
                log(pt)
            out.append(pt)
        return out


def median_es_gaps(points: list[SweepPoint], depths) -> np.ndarray:
    return np.array([np.median([pt.es_gap for pt in points if pt.p == p]) for p in depths])


def non_increasing(values, slack: float = 1e-6) -> bool:
    values = np.asarray(values)
    return bool(np.all(np.diff(values) <= slack))


def es_wins(points: list[SweepPoint], seed: int, tol: float = GAP_TOL) -> bool:
    """ES gap <= QN gap (up to round-off) at every depth where QN ran for this seed."""
    rows = [pt for pt in points if pt.seed == seed and pt.qn_gap is not None]
    return bool(rows) and all(pt.es_gap <= pt.qn_gap + tol for pt in rows)
