"""Depth-p alternating circuit, energies and candidate extraction."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np

from quditqaoa import _kernels
from quditqaoa.encoding import DiagonalHamiltonian
from quditqaoa.operators import exp_hermitian, lx_matrix, spectral_decomposition
from quditqaoa.register import (
    DomainError,
    QuditRegister,
    StateVector,
    assignment_of,
    sample_indices,
)

if TYPE_CHECKING:
    from quditqaoa.constraints import FeasibleProjector

STANDARD = "standard_lx"
DECOUPLED = "dynamical_decoupling"
MIN_FEASIBLE_OVERLAP = 1e-12


class DegenerateEvolutionError(RuntimeError):
    """Projection onto the feasible subspace annihilated the state."""


@dataclass(frozen=True)
class QaoaParams:
    gammas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gammas, dtype=np.float64)).copy()
        b = np.atleast_1d(np.asarray(self.betas, dtype=np.float64)).copy()
        if g.ndim != 1 or g.shape != b.shape:
            raise DomainError(f"gammas {g.shape} and betas {b.shape} must be equal-length vectors")
        if g.size < 1:
            raise DomainError("depth p must be >= 1")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "betas", b)

    @property
    def depth(self) -> int:
        return self.gammas.size

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> QaoaParams:
        """Split ``[gamma_1..gamma_p, beta_1..beta_p]``."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.size % 2 or x.size == 0:
            raise DomainError(f"parameter vector must have even length 2p, got {x.shape}")
        p = x.size // 2
        return cls(x[:p], x[p:])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.gammas, self.betas])

    @classmethod
    def zeros(cls, p: int) -> QaoaParams:
        return cls(np.zeros(p), np.zeros(p))


@dataclass(frozen=True)
class MixerSpec:
    kind: str = STANDARD
    scale: float = 1.0
    projector: FeasibleProjector | None = None

    def __post_init__(self):
        if self.kind not in (STANDARD, DECOUPLED):
            raise DomainError(f"unknown mixer kind {self.kind!r}")
        if (self.kind == DECOUPLED) != (self.projector is not None):
            raise DomainError("a projector is required exactly for the dynamical_decoupling mixer")

    @classmethod
    def decoupled(cls, projector: FeasibleProjector, scale: float = 1.0) -> MixerSpec:
        return cls(DECOUPLED, scale, projector)


@dataclass
class TrialState:
    state: StateVector
    params: QaoaParams
    layer_log: list[dict] = field(default_factory=list)

    @property
    def register(self) -> QuditRegister:
        return self.state.register

    def probabilities(self) -> np.ndarray:
        return self.state.probabilities()


class Candidate(NamedTuple):
    assignment: tuple[int, ...]
    probability: float
    cost: float
    index: int


def _check_register(state: StateVector, H: DiagonalHamiltonian) -> None:
    if state.register != H.register:
        raise DomainError("Hamiltonian register does not match state register")


def mixer_unitary(dim: int, beta: float, scale: float = 1.0) -> np.ndarray:
    """Local factor ``exp(-i beta scale Lx)`` of the product mixer."""
    return exp_hermitian(lx_matrix(dim), beta * scale).matrix


def mixer_unitaries(dim: int, betas: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Stack of local mixer unitaries, shape ``(p, d, d)``."""
    dec = spectral_decomposition(lx_matrix(dim))
    v = dec.eigenvectors
    phases = np.exp(-1j * scale * np.outer(betas, dec.eigenvalues))
    return np.ascontiguousarray(np.einsum("ij,lj,kj->lik", v, phases, v.conj()))


def apply_phase_separator(state: StateVector, H: DiagonalHamiltonian, gamma: float) -> StateVector:
    _check_register(state, H)
    psi = state.amplitudes.copy()
    _kernels.apply_phase(psi, H.values, gamma)
    return StateVector(state.register, psi)


def _project(psi: np.ndarray, mask: np.ndarray) -> float:
    """Zero infeasible amplitudes and renormalize; returns discarded mass."""
    before = float(np.vdot(psi, psi).real)
    psi[~mask] = 0.0
    kept = float(np.vdot(psi, psi).real)
    if kept < MIN_FEASIBLE_OVERLAP:
        raise DegenerateEvolutionError(
            f"feasible overlap {kept:.3g} below {MIN_FEASIBLE_OVERLAP:g}"
        )
    psi /= np.sqrt(kept)
    return before - kept


def _mix_inplace(psi: np.ndarray, reg: QuditRegister, beta: float, mixer: MixerSpec) -> float:
    _kernels.apply_local_all(psi, mixer_unitary(reg.dim, beta, mixer.scale), reg.dim, reg.num_qudits)
    if mixer.kind == DECOUPLED:
        return _project(psi, mixer.projector.feasible_mask)
    return 0.0


def apply_mixer(state: StateVector, beta: float, mixer: MixerSpec | None = None) -> StateVector:
    mixer = mixer or MixerSpec()
    psi = state.amplitudes.copy()
    _mix_inplace(psi, state.register, beta, mixer)
    return StateVector(state.register, psi)


def evolve(
    initial: StateVector,
    H: DiagonalHamiltonian,
    params: QaoaParams,
    mixer: MixerSpec | None = None,
) -> TrialState:
    """Apply ``U_M(beta_p) U_C(gamma_p) ... U_M(beta_1) U_C(gamma_1)`` to ``initial``."""
    mixer = mixer or MixerSpec()
    _check_register(initial, H)
    reg = initial.register
    psi = initial.amplitudes.copy()
    log = []
    if mixer.kind == STANDARD:
        mixers = mixer_unitaries(reg.dim, params.betas, mixer.scale)
        _kernels.evolve(psi, H.values, params.gammas, mixers, reg.dim, reg.num_qudits)
        log.append({"layers": params.depth, "norm": float(np.linalg.norm(psi))})
    else:
        for layer in range(params.depth):
            _kernels.apply_phase(psi, H.values, params.gammas[layer])
            discarded = _mix_inplace(psi, reg, params.betas[layer], mixer)
            log.append({"layer": layer, "norm": float(np.linalg.norm(psi)), "discarded": discarded})
    return TrialState(StateVector(reg, psi), params, log)


def energy(trial: TrialState, H: DiagonalHamiltonian) -> float:
    """Exact expectation ``sum_z P(z) C(z)``."""
    _check_register(trial.state, H)
    return _kernels.expectation(trial.state.amplitudes, H.values)


def energy_sampled(trial: TrialState, H: DiagonalHamiltonian, shots: int, seed) -> float:
    """Monte-Carlo estimate of the energy from ``shots`` basis samples."""
    _check_register(trial.state, H)
    if shots < 1:
        raise DomainError("shots must be >= 1")
    idx = sample_indices(trial.state, seed, shots)
    return float(H.values[idx].mean())


def top_k_candidates(trial: TrialState, K: int, cost: DiagonalHamiltonian) -> list[Candidate]:
    """The K most probable basis states, returned in ascending cost order.

    Probability ties are broken by ascending basis index, and so are cost
    ties in the final ordering.
    """
    _check_register(trial.state, cost)
    if K < 1:
        raise DomainError("K must be >= 1")
    size = trial.register.size
    if K > size:
        warnings.warn(f"K={K} exceeds d**N={size}; clipping", stacklevel=2)
        K = size
    probs = trial.probabilities()
    order = np.lexsort((np.arange(size), -probs))[:K]
    order = order[np.lexsort((order, cost.values[order]))]
    return [
        Candidate(assignment_of(trial.register, int(i)), float(probs[i]), float(cost.values[i]), int(i))
        for i in order
    ]


class CircuitObjective:
    """Fast ``x = [gammas, betas] -> energy`` for the standard mixer.

    ``circuit_values`` generate the phase separator; ``eval_values`` (default
    the same) are averaged over the output distribution. Passing penalized
    values for evaluation gives the penalty-in-classical-loop objective.
    """

    def __init__(
        self,
        circuit: DiagonalHamiltonian,
        evaluate: DiagonalHamiltonian | None = None,
        initial: StateVector | None = None,
        scale: float = 1.0,
    ):
        self.register = circuit.register
        self.circuit_values = circuit.values
        self.eval_values = (evaluate or circuit).values
        if initial is None:
            initial_amp = np.full(self.register.size, self.register.size**-0.5, dtype=np.complex128)
        else:
            initial_amp = initial.amplitudes
        self._initial = np.ascontiguousarray(initial_amp)
        self.scale = scale
        self._levels, self._inverse = _kernels.phase_levels(self.circuit_values)
        dec = spectral_decomposition(lx_matrix(self.register.dim))
        self._vals = dec.eigenvalues
        self._vecs = np.ascontiguousarray(dec.eigenvectors)
        self._vecs_h = np.ascontiguousarray(dec.eigenvectors.conj().T)

    def state(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        p = x.size // 2
        phases = np.exp(-1j * self.scale * np.outer(x[p:], self._vals))
        mixers = np.ascontiguousarray(self._vecs[None, :, :] * phases[:, None, :] @ self._vecs_h)
        psi = self._initial.copy()
        _kernels.evolve_indexed(psi, self._levels, self._inverse, np.ascontiguousarray(x[:p]),
                                mixers, self.register.dim, self.register.num_qudits)
        return psi

    def __call__(self, x) -> float:
        return _kernels.expectation(self.state(x), self.eval_values)
