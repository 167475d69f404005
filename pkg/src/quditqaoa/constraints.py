"""Constraint handling: classical-loop penalties, penalized Hamiltonians,
conditional ancilla gates and dynamical-decoupling projection.

Constraints follow the convention ``g(z) == 0`` (equality) or ``g(z) <= 0``
(inequality).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from quditqaoa import _kernels
from quditqaoa.encoding import DiagonalHamiltonian
from quditqaoa.qaoa import (
    MixerSpec,
    QaoaParams,
    TrialState,
    _mix_inplace,
    apply_mixer,
    energy,
)
from quditqaoa.register import DomainError, QuditRegister, StateVector, assignment_of

EQUALITY = "equality"
INEQUALITY = "inequality"
DEFAULT_EXPONENT = {EQUALITY: 2, INEQUALITY: 1}
DEFAULT_TRAJECTORIES = 256


class ConstraintConfigError(ValueError):
    pass


class InfeasibleError(ValueError):
    """No basis state satisfies the equality constraints."""


class TrajectoryError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConstraintSpec:
    """One constraint ``g(z) == 0`` or ``g(z) <= 0``.

    ``evaluator`` maps an assignment tuple to ``g(z)``. ``vectorized``
    optionally maps the ``(d**N, N)`` digit table to all values at once.
    """

    evaluator: Callable[[tuple], float]
    kind: str = EQUALITY
    exponent: int | None = None
    weight: float = 1.0
    name: str = ""
    vectorized: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in (EQUALITY, INEQUALITY):
            raise ConstraintConfigError(f"unknown constraint kind {self.kind!r}")
        if self.exponent is None:
            object.__setattr__(self, "exponent", DEFAULT_EXPONENT[self.kind])
        if int(self.exponent) < 1:
            raise ConstraintConfigError("penalty exponent must be >= 1")
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ConstraintConfigError(f"weight must be finite and >= 0, got {self.weight}")

    def g_values(self, register: QuditRegister) -> np.ndarray:
        if self.vectorized is not None:
            vals = np.asarray(self.vectorized(register.digits()), dtype=np.float64)
            return np.broadcast_to(vals, (register.size,)).copy()
        return np.array([self.evaluator(assignment_of(register, i)) for i in range(register.size)],
                        dtype=np.float64)

    def with_weight(self, weight: float) -> ConstraintSpec:
        return ConstraintSpec(self.evaluator, self.kind, self.exponent, weight, self.name, self.vectorized)

    def satisfied(self, g) -> np.ndarray | bool:
        return np.asarray(g) == 0 if self.kind == EQUALITY else np.asarray(g) <= 0


def penalty_value(g_value, kind: str, exponent: int):
    """``|g|**a`` for equalities, ``max(0, g)**a`` for inequalities."""
    if exponent < 1:
        raise ConstraintConfigError("penalty exponent must be >= 1")
    g = np.asarray(g_value, dtype=np.float64)
    if kind == EQUALITY:
        out = np.abs(g) ** exponent
    elif kind == INEQUALITY:
        out = np.maximum(0.0, g) ** exponent
    else:
        raise ConstraintConfigError(f"unknown constraint kind {kind!r}")
    return float(out) if out.ndim == 0 else out


def penalized_cost(base_cost: Callable[[tuple], float], constraints: Sequence[ConstraintSpec]):
    constraints = list(constraints)

    def cost(z):
        total = base_cost(z)
        for c in constraints:
            total += c.weight * penalty_value(c.evaluator(z), c.kind, c.exponent)
        return total

    return cost


def penalty_diagonal(register: QuditRegister, constraints: Sequence[ConstraintSpec]) -> np.ndarray:
    total = np.zeros(register.size)
    for c in constraints:
        total += c.weight * penalty_value(c.g_values(register), c.kind, c.exponent)
    return total


@dataclass
class PenalizedProblem:
    base: DiagonalHamiltonian
    constraints: list[ConstraintSpec] = field(default_factory=list)

    @property
    def penalized(self) -> DiagonalHamiltonian:
        reg = self.base.register
        return DiagonalHamiltonian(reg, self.base.values + penalty_diagonal(reg, self.constraints))

    def feasible_mask(self) -> np.ndarray:
        reg = self.base.register
        mask = np.ones(reg.size, dtype=bool)
        for c in self.constraints:
            mask &= c.satisfied(c.g_values(reg))
        return mask


def penalized_diagonal(problem: PenalizedProblem) -> DiagonalHamiltonian:
    return problem.penalized


def classical_loop_objective(
    trial: TrialState, base: DiagonalHamiltonian, constraints: Sequence[ConstraintSpec]
) -> float:
    """Average of the penalized cost over a circuit driven by the bare cost."""
    if trial.register != base.register:
        raise DomainError("register mismatch")
    if not constraints:
        return energy(trial, base)
    pen = base.values + penalty_diagonal(base.register, constraints)
    return float(np.dot(trial.probabilities(), pen))


def violation_indicator_diagonal(constraint: ConstraintSpec, register: QuditRegister) -> DiagonalHamiltonian:
    """``H_g``: 1 on basis states violating the constraint, 0 elsewhere."""
    g = constraint.g_values(register)
    return DiagonalHamiltonian(register, (~constraint.satisfied(g)).astype(np.float64))


# ------------------------------------------------------- conditional gates

@dataclass
class AncillaState:
    """Register state times one ancilla qubit.

    ``amplitudes[y, i]`` is the amplitude of ``|z_i>|y>``; flattened, the
    ancilla is the most significant factor (index ``i + d**N * y``).
    """

    register: QuditRegister
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape[0] != 2:
            raise DomainError(f"ancilla dimension must be 2, got {self.amplitudes.shape[0]}")
        if self.amplitudes.shape != (2, self.register.size):
            raise DomainError(f"ancilla state shape {self.amplitudes.shape} invalid")

    @classmethod
    def attach(cls, state: StateVector, y: int = 0) -> AncillaState:
        amp = np.zeros((2, state.register.size), dtype=np.complex128)
        amp[y] = state.amplitudes
        return cls(state.register, amp)

    def flat(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def ancilla_probability(self, y: int = 1) -> float:
        row = self.amplitudes[y]
        return float(np.vdot(row, row).real)


def conditional_gate_apply(state: AncillaState, constraint: ConstraintSpec) -> AncillaState:
    """``exp(-i H_g (x) (pi/2) X)``: ``-iX`` on the ancilla of violating branches."""
    viol = violation_indicator_diagonal(constraint, state.register).values.astype(bool)
    amp = state.amplitudes.copy()
    amp[0, viol], amp[1, viol] = -1j * state.amplitudes[1, viol], -1j * state.amplitudes[0, viol]
    return AncillaState(state.register, amp)


@dataclass
class AncillaRun:
    trajectories: int
    seed: int | None
    outcomes: list[list[list[int]]] = field(default_factory=list)  # [trajectory][layer][constraint]
    branches: list[list[str]] = field(default_factory=list)  # [trajectory][layer] "base"|"penalized"

    def frequencies(self) -> np.ndarray:
        """Ancilla-1 frequency per (layer, constraint) over trajectories."""
        if not self.outcomes:
            return np.zeros((0, 0))
        return np.asarray(self.outcomes, dtype=float).mean(axis=0)

    def summary(self) -> dict:
        return {
            "trajectories": self.trajectories,
            "seed": self.seed,
            "ancilla_one_frequency": self.frequencies().tolist(),
        }


def run_conditional_trajectory(
    initial: StateVector,
    H_base: DiagonalHamiltonian,
    H_penalized: DiagonalHamiltonian,
    params: QaoaParams,
    mixer: MixerSpec | None,
    constraints: Sequence[ConstraintSpec],
    seed,
) -> tuple[TrialState, AncillaRun]:
    """One measure-and-branch trajectory.

    Per layer: phase separation with ``H_base`` (first layer, or all ancillas
    read 0 last layer) or ``H_penalized``; mixer; then for each constraint a
    fresh ancilla in ``|0>``, the conditional gate, a projective ancilla
    measurement, collapse and reset.
    """
    mixer = mixer or MixerSpec()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    reg = initial.register
    psi = initial.amplitudes.copy()
    outcomes, branches, log = [], [], []
    violated = False
    for layer in range(params.depth):
        H = H_penalized if violated else H_base
        branches.append("penalized" if violated else "base")
        _kernels.apply_phase(psi, H.values, params.gammas[layer])
        _mix_inplace(psi, reg, params.betas[layer], mixer)
        layer_outcomes = []
        for c in constraints:
            anc = conditional_gate_apply(AncillaState.attach(StateVector(reg, psi)), c)
            p1 = anc.ancilla_probability(1)
            y = int(rng.random() < p1)
            branch_p = p1 if y else 1.0 - p1
            if branch_p <= 0.0:
                raise TrajectoryError(f"measured zero-probability ancilla branch at layer {layer}")
            psi = anc.amplitudes[y] / np.sqrt(branch_p)
            if y:
                psi = psi * 1j  # undo the -i from the conditional gate
            layer_outcomes.append(y)
        violated = any(layer_outcomes)
        outcomes.append(layer_outcomes)
        log.append({"layer": layer, "outcomes": layer_outcomes, "branch": branches[-1]})
    run = AncillaRun(1, None if isinstance(seed, np.random.Generator) else seed, [outcomes], [branches])
    return TrialState(StateVector(reg, psi), params, log), run


def run_conditional_ensemble(
    initial: StateVector,
    H_base: DiagonalHamiltonian,
    H_penalized: DiagonalHamiltonian,
    params: QaoaParams,
    mixer: MixerSpec | None,
    constraints: Sequence[ConstraintSpec],
    seed: int,
    trajectories: int = DEFAULT_TRAJECTORIES,
) -> tuple[np.ndarray, AncillaRun]:
    """Average output distribution over independent trajectories.

    Trajectory ``t`` uses the generator spawned from ``SeedSequence(seed)``
    at position ``t``; failed trajectories are dropped and counted.
    """
    children = np.random.SeedSequence(seed).spawn(trajectories)
    probs = np.zeros(initial.register.size)
    run = AncillaRun(trajectories, seed)
    kept = 0
    for child in children:
        try:
            trial, one = run_conditional_trajectory(
                initial, H_base, H_penalized, params, mixer, constraints, np.random.default_rng(child)
            )
        except TrajectoryError:
            continue
        probs += trial.probabilities()
        run.outcomes.extend(one.outcomes)
        run.branches.extend(one.branches)
        kept += 1
    if kept == 0:
        raise TrajectoryError("every trajectory failed")
    return probs / kept, run


# ---------------------------------------------------- dynamical decoupling

@dataclass(frozen=True, eq=False)
class FeasibleProjector:
    register: QuditRegister
    feasible_mask: np.ndarray
    largest_eigenvalues: tuple[int, ...] = ()

    @property
    def num_feasible(self) -> int:
        return int(self.feasible_mask.sum())

    def leakage(self, state: StateVector) -> float:
        p = state.probabilities()
        return float(p[~self.feasible_mask].sum())


def feasible_projector(register: QuditRegister, equality_constraints: Sequence[ConstraintSpec]) -> FeasibleProjector:
    mask = np.ones(register.size, dtype=bool)
    lambdas = []
    for c in equality_constraints:
        if c.kind != EQUALITY:
            raise ConstraintConfigError(
                f"constraint {c.name or '?'} is an inequality; decoupling supports equalities only"
            )
        g = c.g_values(register)
        if not np.allclose(g, np.round(g), atol=1e-12, rtol=0):
            raise ConstraintConfigError(
                f"constraint {c.name or '?'} has a non-integer spectrum; rescale it first"
            )
        g = np.round(g)
        lambdas.append(int(np.max(np.abs(g))))
        mask &= g == 0
    if not mask.any():
        raise InfeasibleError("equality constraints admit no basis state")
    mask.setflags(write=False)
    return FeasibleProjector(register, mask, tuple(lambdas))


def feasible_uniform_state(projector: FeasibleProjector) -> StateVector:
    amp = projector.feasible_mask.astype(np.complex128)
    return StateVector(projector.register, amp / np.sqrt(amp.sum().real))


def dd_mixer_apply(state: StateVector, beta: float, projector: FeasibleProjector, scale: float = 1.0) -> StateVector:
    """Standard mixer followed by projection onto the feasible subspace."""
    return apply_mixer(state, beta, MixerSpec.decoupled(projector, scale))


def symmetrize_operator_dense(
    op_matrix: np.ndarray,
    constraints: ConstraintSpec | Sequence[ConstraintSpec],
    num_points: int,
    register: QuditRegister | None = None,
    period: float = 2 * np.pi,
) -> np.ndarray:
    """Discretized average of ``exp(-i t G) O exp(i t G)`` over ``t``.

    ``t_j = period * j / num_points``. With integer spectra, ``period = 2 pi``
    and ``num_points`` larger than every eigenvalue gap, all matrix elements
    between different eigenvalues of ``G`` vanish. Several constraints are
    symmetrized one after another, in list order.
    """
    if isinstance(constraints, ConstraintSpec):
        constraints = [constraints]
    mat = np.asarray(op_matrix, dtype=np.complex128)
    if register is None:
        raise DomainError("register is required to tabulate the constraint spectrum")
    for c in constraints:
        g = c.g_values(register)
        acc = np.zeros_like(mat)
        for j in range(num_points):
            u = np.diag(np.exp(-1j * (period * j / num_points) * g))
            acc += u @ mat @ u.conj().T
        mat = acc / num_points
    return mat
