"""Concrete bounded-integer problems and the exhaustive oracle.

Each problem exposes ``register``, ``cost(z)``, ``cost_values()`` (the cost
on every basis state), ``diagonal()`` and ``constraints()``. Problems whose
cost has a closed operator form also provide ``lz_polynomial()`` and/or
``z_polynomial()``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from quditqaoa.constraints import EQUALITY, INEQUALITY, ConstraintSpec
from quditqaoa.encoding import DiagonalHamiltonian, LzPolynomial, ZPolynomial
from quditqaoa.register import DomainError, QuditRegister, assignment_of, get_dim_limit

OPTIMUM_TOL = 1e-9

# 3-colorable, 10 edges, 12 proper 3-colorings; with color costs (0, 1, 2) the
# optimum is unique.
BUNDLED_GRAPH_N6 = (
    (0, 2), (0, 3), (0, 4), (0, 5), (1, 2), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4),
)


class _ProblemBase:
    register: QuditRegister

    def cost(self, z) -> float:
        z = np.asarray(z, dtype=np.int64).reshape(1, -1)
        return float(self._values(z)[0])

    def cost_values(self) -> np.ndarray:
        return self._values(self.register.digits())

    def diagonal(self) -> DiagonalHamiltonian:
        return DiagonalHamiltonian(self.register, self.cost_values())

    def constraints(self) -> list[ConstraintSpec]:
        return []

    def lz_polynomial(self) -> LzPolynomial | None:
        return None

    def z_polynomial(self) -> ZPolynomial | None:
        return None

    def _values(self, digits: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError


def _constraint(fn, kind, weight, name, exponent=None) -> ConstraintSpec:
    """Wrap a vectorized ``digits -> g`` function as a ConstraintSpec."""

    def scalar(z, _fn=fn):
        return float(_fn(np.asarray(z, dtype=np.int64).reshape(1, -1))[0])

    return ConstraintSpec(scalar, kind, exponent, weight, name, vectorized=fn)


# --------------------------------------------------------------- coloring

@dataclass
class GraphColoringProblem(_ProblemBase):
    """Max-k-coloring with optional per-color costs.

    ``cost(z) = sum_n color_costs[z_n] + conflict_weight * #(same-colored edges)``.
    With all color costs zero and unit weight this counts conflicting edges.
    """

    num_nodes: int
    edges: Sequence[tuple[int, int]]
    num_colors: int = 3
    color_costs: Sequence[float] | None = None
    conflict_weight: float = 1.0

    def __post_init__(self):
        self.edges = [tuple(sorted((int(u), int(v)))) for u, v in self.edges]
        for u, v in self.edges:
            if u == v:
                raise DomainError(f"self-loop on node {u}")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise DomainError(f"edge ({u}, {v}) references a missing node")
        if self.num_colors < 2:
            raise DomainError("num_colors must be >= 2")
        if self.color_costs is None:
            self.color_costs = [0.0] * self.num_colors
        self.color_costs = [float(c) for c in self.color_costs]
        if len(self.color_costs) != self.num_colors:
            raise DomainError("need one cost per color")
        self.register = QuditRegister(self.num_nodes, self.num_colors)

    def _values(self, digits):
        c = np.asarray(self.color_costs)
        total = c[digits].sum(axis=1)
        for u, v in self.edges:
            total = total + self.conflict_weight * (digits[:, u] == digits[:, v])
        return total

    def conflict_constraints(self, weight: float | None = None) -> list[ConstraintSpec]:
        """Edge conflicts as equality constraints ``delta(z_u, z_v) == 0``."""
        w = self.conflict_weight if weight is None else weight
        out = []
        for u, v in self.edges:
            out.append(_constraint(
                lambda D, u=u, v=v: (D[:, u] == D[:, v]).astype(np.float64),
                EQUALITY, w, f"conflict_{u}_{v}", exponent=1,
            ))
        return out

    def lz_polynomial(self) -> LzPolynomial | None:
        return coloring_lz_hamiltonian(self) if self.num_colors == 3 else None

    def z_polynomial(self) -> ZPolynomial:
        return coloring_z_hamiltonian(self)


def coloring_cost(problem: GraphColoringProblem, assignment) -> float:
    return problem.cost(assignment)


def coloring_lz_hamiltonian(problem: GraphColoringProblem) -> LzPolynomial:
    """Three-color cost as a polynomial in Lz (colors 0, 1, 2 -> m = -1, 0, 1).

    Node term: ``c0 + (c1 - c_-1)/2 Lz + (c1 + c_-1 - 2 c0)/2 Lz^2``.
    Edge term: ``lam [1 - Lz_n^2 - Lz_m^2 + Lz_n Lz_m / 2 + 3/2 Lz_n^2 Lz_m^2]``,
    which equals ``lam * delta(m_n, m_m)`` on {-1, 0, 1}^2.
    """
    if problem.num_colors != 3:
        raise DomainError("the Lz form is only provided for k = 3; use coloring_z_hamiltonian")
    cm, c0, cp = problem.color_costs
    lam = problem.conflict_weight
    poly = LzPolynomial(problem.register)
    for n in range(problem.num_nodes):
        poly.add({}, c0)
        poly.add({n: 1}, (cp - cm) / 2)
        poly.add({n: 2}, (cp + cm - 2 * c0) / 2)
    for n, m in problem.edges:
        poly.add({}, lam)
        poly.add({n: 2}, -lam)
        poly.add({m: 2}, -lam)
        poly.add({n: 1, m: 1}, lam / 2)
        poly.add({n: 2, m: 2}, 1.5 * lam)
    return poly


def coloring_z_hamiltonian(problem: GraphColoringProblem) -> ZPolynomial:
    """Generalized-Z form for any k.

    Each edge contributes ``(lam/k) sum_{a=0}^{k-1} Z_n^a Z_m^{(k-a) mod k}``
    (the unnormalized Kronecker delta). Color costs enter through the
    single-qudit transform of the per-node cost table.
    """
    k, n_nodes = problem.num_colors, problem.num_nodes
    lam = problem.conflict_weight
    terms: dict[tuple[int, ...], complex] = {}

    def add(exps: dict[int, int], c: complex):
        key = [0] * n_nodes
        for q, a in exps.items():
            key[q] = a % k
        key = tuple(key)
        terms[key] = terms.get(key, 0j) + c

    chat = np.fft.fft(np.asarray(problem.color_costs, dtype=np.complex128)) / k
    for node in range(n_nodes):
        for a in range(k):
            if abs(chat[a]) > 1e-15:
                add({node: a}, chat[a])
    for u, v in problem.edges:
        for a in range(k):
            add({u: a, v: (k - a) % k}, lam / k)
    return ZPolynomial(problem.register, terms)


def load_edge_list(path) -> list[tuple[int, int]]:
    """Read ``u v`` pairs (0-based), one per line; ``#`` starts a comment."""
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DomainError(f"{path}:{lineno}: expected 'u v'")
        edges.append((int(parts[0]), int(parts[1])))
    return edges


def planted_colorable_graph(num_nodes: int, k: int, edge_prob: float, seed) -> list[tuple[int, int]]:
    """Random graph with a planted proper k-coloring."""
    rng = np.random.default_rng(seed)
    colors = rng.integers(0, k, size=num_nodes)
    return [
        (u, v)
        for u, v in itertools.combinations(range(num_nodes), 2)
        if colors[u] != colors[v] and rng.random() < edge_prob
    ]


# ---------------------------------------------------------------- charging

@dataclass
class EvChargingProblem(_ProblemBase):
    """Preemptive charging schedule for ``N`` vehicles over ``T`` steps.

    Qudit ``n*T + t`` holds the level of vehicle ``n`` in step ``t``; digit
    ``z`` maps to level ``L = z - (d-1)/2`` (d odd). Energies are kWh, powers
    kW, prices currency/kWh, ``step_duration`` hours.
    """

    num_vehicles: int
    num_steps: int
    step_duration: float
    powers: Sequence[float]
    buy_prices: Sequence[float]
    sell_prices: Sequence[float]
    losses: Sequence[float]
    e_init: Sequence[float]
    e_target: Sequence[float]
    e_min: Sequence[float]
    e_max: Sequence[float]
    p_min: float
    p_max: float
    levels: int = 3
    constraint_weight: float = 1.0

    def __post_init__(self):
        n, t = self.num_vehicles, self.num_steps
        if self.levels % 2 == 0:
            raise DomainError("EV levels must be odd so the level set is symmetric")
        arr = lambda x, size, name: _vector(x, size, name)  # noqa: E731
        self.powers = arr(self.powers, n, "powers")
        self.losses = arr(self.losses, n, "losses")
        self.e_init = arr(self.e_init, n, "e_init")
        self.e_target = arr(self.e_target, n, "e_target")
        self.e_min = arr(self.e_min, n, "e_min")
        self.e_max = arr(self.e_max, n, "e_max")
        self.buy_prices = arr(self.buy_prices, t, "buy_prices")
        self.sell_prices = arr(self.sell_prices, t, "sell_prices")
        if np.any(self.losses < 0):
            raise DomainError("losses must be >= 0")
        if np.any(self.e_min > self.e_init) or np.any(self.e_init > self.e_max):
            raise DomainError("need e_min <= e_init <= e_max")
        if not self.p_min < 0 < self.p_max:
            raise DomainError("need p_min < 0 < p_max")
        self.register = QuditRegister(n * t, self.levels)

    def qudit(self, n: int, t: int) -> int:
        return n * self.num_steps + t

    def level_table(self, digits: np.ndarray) -> np.ndarray:
        """Levels with shape ``(rows, N, T)``."""
        return (digits - (self.levels - 1) // 2).reshape(-1, self.num_vehicles, self.num_steps)

    def _values(self, digits):
        L = self.level_table(digits)
        a = (self.buy_prices + self.sell_prices) / 2
        b = (self.buy_prices - self.sell_prices) / 2
        per = self.step_duration * self.powers[None, :, None] * (a * L + b * L**2)
        return per.sum(axis=(1, 2))

    def soc_table(self, digits: np.ndarray) -> np.ndarray:
        """``E[rows, n, t]`` for t = 0..T (t counts completed steps)."""
        L = self.level_table(digits)
        delta = self.step_duration * self.powers[None, :, None] * (L - self.losses[None, :, None] * L**2)
        out = np.empty(L.shape[:2] + (self.num_steps + 1,))
        out[:, :, 0] = self.e_init[None, :]
        out[:, :, 1:] = self.e_init[None, :, None] + np.cumsum(delta, axis=2)
        return out

    def constraints(self) -> list[ConstraintSpec]:
        w = self.constraint_weight
        out = []
        T = self.num_steps
        for n in range(self.num_vehicles):
            out.append(_constraint(
                lambda D, n=n: self.e_target[n] - self.soc_table(D)[:, n, T],
                INEQUALITY, w, f"target_soc_{n}"))
        for n in range(self.num_vehicles):
            for t in range(1, T + 1):
                out.append(_constraint(
                    lambda D, n=n, t=t: self.e_min[n] - self.soc_table(D)[:, n, t],
                    INEQUALITY, w, f"min_soc_{n}_{t}"))
                out.append(_constraint(
                    lambda D, n=n, t=t: self.soc_table(D)[:, n, t] - self.e_max[n],
                    INEQUALITY, w, f"max_soc_{n}_{t}"))
        for t in range(T):
            out.append(_constraint(
                lambda D, t=t: self.p_min - self._power(D, t), INEQUALITY, w, f"min_power_{t}"))
            out.append(_constraint(
                lambda D, t=t: self._power(D, t) - self.p_max, INEQUALITY, w, f"max_power_{t}"))
        return out

    def _power(self, digits, t):
        return (self.powers[None, :] * self.level_table(digits)[:, :, t]).sum(axis=1)

    def lz_polynomial(self) -> LzPolynomial:
        poly = LzPolynomial(self.register)
        a = (self.buy_prices + self.sell_prices) / 2
        b = (self.buy_prices - self.sell_prices) / 2
        for n in range(self.num_vehicles):
            for t in range(self.num_steps):
                q = self.qudit(n, t)
                scale = self.step_duration * self.powers[n]
                poly.add({q: 1}, scale * a[t])
                poly.add({q: 2}, scale * b[t])
        return poly


def _vector(x, size, name) -> np.ndarray:
    v = np.broadcast_to(np.asarray(x, dtype=np.float64), (size,)).copy()
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} must be finite")
    return v


def ev_cost(problem: EvChargingProblem, assignment) -> float:
    return problem.cost(assignment)


def ev_soc(problem: EvChargingProblem, assignment, n: int, t: int) -> float:
    if not (0 <= n < problem.num_vehicles and 0 <= t <= problem.num_steps):
        raise DomainError(f"(n={n}, t={t}) out of range")
    z = np.asarray(assignment, dtype=np.int64).reshape(1, -1)
    return float(problem.soc_table(z)[0, n, t])


def ev_constraints(problem: EvChargingProblem) -> list[ConstraintSpec]:
    return problem.constraints()


# ---------------------------------------------------------------- knapsack

@dataclass
class KnapsackProblem(_ProblemBase):
    """Bounded knapsack as minimization of ``-sum v_i z_i``, ``z_i in 0..copies``."""

    weights: Sequence[float]
    values: Sequence[float]
    copies: int
    capacity: float
    constraint_weight: float = 1.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.weights.shape != self.values.shape or self.weights.ndim != 1:
            raise DomainError("weights and values must be equal-length vectors")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.values))):
            raise DomainError("weights and values must be finite")
        if self.copies < 1:
            raise DomainError("copies must be >= 1")
        self.register = QuditRegister(self.weights.size, self.copies + 1)

    def _values(self, digits):
        return -(digits * self.values[None, :]).sum(axis=1)

    def constraints(self) -> list[ConstraintSpec]:
        return [_constraint(
            lambda D: (D * self.weights[None, :]).sum(axis=1) - self.capacity,
            INEQUALITY, self.constraint_weight, "capacity")]

    def lz_polynomial(self) -> LzPolynomial:
        ell = self.copies / 2
        poly = LzPolynomial(self.register)
        poly.add({}, -ell * float(self.values.sum()))
        for i, v in enumerate(self.values):
            poly.add({i: 1}, -v)
        return poly


def knapsack_cost(problem: KnapsackProblem, assignment) -> float:
    return problem.cost(assignment)


def knapsack_constraints(problem: KnapsackProblem) -> list[ConstraintSpec]:
    return problem.constraints()


# --------------------------------------------------------------- partition

@dataclass
class PartitionProblem(_ProblemBase):
    """Multiway number partitioning; digit ``z_l`` puts ``s_l`` in subset ``z_l + 1``."""

    numbers: Sequence[int]
    num_subsets: int

    def __post_init__(self):
        self.numbers = np.asarray(self.numbers, dtype=np.float64)
        if self.numbers.ndim != 1 or np.any(self.numbers <= 0):
            raise DomainError("numbers must be positive")
        if self.numbers.size < 1 or self.num_subsets < 2:
            raise DomainError("need at least one number and k >= 2")
        self.register = QuditRegister(self.numbers.size, self.num_subsets)

    def subset_sums(self, digits: np.ndarray) -> np.ndarray:
        digits = np.atleast_2d(digits)
        onehot = digits[:, :, None] == np.arange(self.num_subsets)[None, None, :]
        return (onehot * self.numbers[None, :, None]).sum(axis=1)

    def _values(self, digits):
        V = self.subset_sums(digits)
        total = np.zeros(V.shape[0])
        for a, b in itertools.combinations(range(self.num_subsets), 2):
            total += (V[:, a] - V[:, b]) ** 2
        return total


def partition_cost(problem: PartitionProblem, assignment) -> float:
    return problem.cost(assignment)


def partition_delta_polynomial(k: int, i: int) -> list[Fraction]:
    """Coefficients (increasing powers) of ``delta_{i,x}`` on labels ``x = 1..k``.

    Lagrange basis polynomial in exact rationals; degree ``k - 1``.
    """
    if not 1 <= i <= k:
        raise DomainError(f"label {i} outside 1..{k}")
    coeffs = [Fraction(1)]
    for j in range(1, k + 1):
        if j == i:
            continue
        # multiply by (x - j) / (i - j)
        nxt = [Fraction(0)] * (len(coeffs) + 1)
        for p, c in enumerate(coeffs):
            nxt[p + 1] += c / (i - j)
            nxt[p] -= c * j / (i - j)
        coeffs = nxt
    return coeffs


def evaluate_polynomial(coeffs: Sequence, x):
    return sum(c * x**p for p, c in enumerate(coeffs))


# ---------------------------------------------------------------- job shop

AVERAGE_COMPLETION = "average_completion"
MAKESPAN = "makespan"


@dataclass
class JobShopProblem(_ProblemBase):
    """Start times ``t_{n,k} in 1..T`` on qudits ``n*K + k`` (digit ``t - 1``).

    Strict inequalities use an integer slack of one. The makespan objective
    adds one auxiliary qudit (index ``N*K``) holding the finishing time.
    """

    durations: Sequence[Sequence[int]]
    machines: Sequence[Sequence[int]]
    horizon: int
    objective: str = AVERAGE_COMPLETION
    constraint_weight: float = 1.0
    num_machines: int | None = None

    def __post_init__(self):
        self.durations = np.asarray(self.durations, dtype=np.int64)
        self.machines = np.asarray(self.machines, dtype=np.int64)
        if self.durations.ndim != 2 or self.durations.shape != self.machines.shape:
            raise DomainError("durations and machines must both be N x K tables")
        if np.any(self.durations < 1):
            raise DomainError("durations must be >= 1")
        if self.num_machines is None:
            self.num_machines = int(self.machines.max()) + 1
        if np.any(self.machines < 0) or np.any(self.machines >= self.num_machines):
            raise DomainError("machine index out of range")
        if self.objective not in (AVERAGE_COMPLETION, MAKESPAN):
            raise DomainError(f"unknown objective {self.objective!r}")
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")
        self.num_jobs, self.ops_per_job = self.durations.shape
        extra = 1 if self.objective == MAKESPAN else 0
        self.register = QuditRegister(self.num_jobs * self.ops_per_job + extra, self.horizon)

    def qudit(self, n: int, k: int) -> int:
        return n * self.ops_per_job + k

    @property
    def aux_qudit(self) -> int:
        return self.num_jobs * self.ops_per_job

    def _t(self, digits, n, k):
        return digits[:, self.qudit(n, k)] + 1

    def _values(self, digits):
        K = self.ops_per_job - 1
        if self.objective == MAKESPAN:
            return (digits[:, self.aux_qudit] + 1).astype(np.float64)
        ends = [self._t(digits, n, K) + self.durations[n, K] for n in range(self.num_jobs)]
        return np.mean(ends, axis=0).astype(np.float64)

    def constraints(self) -> list[ConstraintSpec]:
        w = self.constraint_weight
        out = []
        p = self.durations
        for n in range(self.num_jobs):
            for k in range(self.ops_per_job - 1):
                out.append(_constraint(
                    lambda D, n=n, k=k: (self._t(D, n, k) + p[n, k] + 1 - self._t(D, n, k + 1)).astype(float),
                    INEQUALITY, w, f"order_{n}_{k}"))
        ops = [(n, k) for n in range(self.num_jobs) for k in range(self.ops_per_job)]
        for (n, k), (n2, k2) in itertools.combinations(ops, 2):
            if self.machines[n, k] != self.machines[n2, k2]:
                continue
            out.append(_constraint(
                lambda D, n=n, k=k, n2=n2, k2=k2: (
                    1 - (self._t(D, n, k) + p[n, k] - self._t(D, n2, k2))
                    * (self._t(D, n, k) - self._t(D, n2, k2) - p[n2, k2])
                ).astype(float),
                INEQUALITY, w, f"overlap_{n}_{k}_{n2}_{k2}"))
        if self.objective == MAKESPAN:
            K = self.ops_per_job - 1
            for n in range(self.num_jobs):
                out.append(_constraint(
                    lambda D, n=n: (self._t(D, n, K) + p[n, K] + 1 - (D[:, self.aux_qudit] + 1)).astype(float),
                    INEQUALITY, w, f"makespan_{n}"))
        return out


def jobshop_cost(problem: JobShopProblem, assignment) -> float:
    return problem.cost(assignment)


def jobshop_constraints(problem: JobShopProblem) -> list[ConstraintSpec]:
    return problem.constraints()


# ---------------------------------------------------------------- oracle

def base_and_constraints(problem) -> tuple[DiagonalHamiltonian, list[ConstraintSpec]]:
    """Bare objective plus the constraints that penalty strategies act on.

    Coloring conflicts are treated as equality constraints weighted by the
    conflict weight; the bare coloring objective is then the color costs alone.
    """
    if isinstance(problem, GraphColoringProblem):
        bare = GraphColoringProblem(problem.num_nodes, problem.edges, problem.num_colors,
                                    problem.color_costs, 0.0)
        return bare.diagonal(), problem.conflict_constraints()
    return problem.diagonal(), problem.constraints()


def brute_force_optima(diagonal: DiagonalHamiltonian, limit: int | None = None, tol: float = OPTIMUM_TOL):
    """Exact minimum and every assignment attaining it (ascending index)."""
    reg = diagonal.register
    cap = get_dim_limit() if limit is None else limit
    if reg.size > cap:
        raise DomainError(f"d**N = {reg.size} exceeds brute-force limit {cap}")
    vals = diagonal.values
    best = float(vals.min())
    idx = np.flatnonzero(vals <= best + tol)
    return best, [assignment_of(reg, int(i)) for i in idx]


def optimal_indices(diagonal: DiagonalHamiltonian, tol: float = OPTIMUM_TOL) -> np.ndarray:
    vals = diagonal.values
    return np.flatnonzero(vals <= vals.min() + tol)


# ------------------------------------------------------- bundled instances

def bundled_coloring(color_costs=(0.0, 0.0, 0.0), conflict_weight: float = 20.0) -> GraphColoringProblem:
    return GraphColoringProblem(6, BUNDLED_GRAPH_N6, 3, list(color_costs), conflict_weight)


def bundled_ev(constraint_weight: float = 1.0) -> EvChargingProblem:
    return EvChargingProblem(
        num_vehicles=2, num_steps=2, step_duration=1.0, powers=[1.0, 2.0],
        buy_prices=[3.0, 1.0], sell_prices=[2.0, 1.0], losses=[0.0, 0.0],
        e_init=[1.0, 2.0], e_target=[2.0, 2.0], e_min=[0.0, 0.0], e_max=[3.0, 4.0],
        p_min=-2.0, p_max=2.0, constraint_weight=constraint_weight,
    )


def bundled_knapsack(constraint_weight: float = 1.0) -> KnapsackProblem:
    return KnapsackProblem([2.0, 4.0, 3.0], [3.0, 5.0, 4.0], 2, 6.0, constraint_weight)


def bundled_partition() -> PartitionProblem:
    return PartitionProblem([1, 1, 2, 3, 4, 5], 2)


def bundled_jobshop(constraint_weight: float = 1.0, objective: str = AVERAGE_COMPLETION) -> JobShopProblem:
    return JobShopProblem([[1, 1], [1, 1]], [[0, 1], [1, 0]], 4, objective, constraint_weight)


def bundled_instances() -> dict[str, _ProblemBase]:
    return {
        "coloring": bundled_coloring(),
        "coloring_costs": bundled_coloring((0.0, 1.0, 2.0)),
        "ev": bundled_ev(),
        "knapsack": bundled_knapsack(),
        "partition": bundled_partition(),
        "jobshop": bundled_jobshop(),
    }
