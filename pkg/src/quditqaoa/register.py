"""N-qudit Hilbert space: basis indexing and state-vector primitives.

Basis order is little-endian: ``index = sum_j z_j * d**j``, so qudit 0 is the
fastest-varying digit. Every serialized output records this convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BASIS_ORDER = "little-endian"
PRNG_NAME = "numpy.PCG64"
DEFAULT_DIM_LIMIT = 2**24


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class StateError(ValueError):
    """State vector violates a precondition (e.g. not normalized)."""


class DimensionLimitError(DomainError):
    """Hilbert-space dimension exceeds the configured cap."""


_dim_limit = DEFAULT_DIM_LIMIT


def set_dim_limit(limit: int) -> int:
    """Set the global cap on ``d**N``; returns the previous value."""
    global _dim_limit
    if limit < 1:
        raise DomainError("dimension limit must be positive")
    previous, _dim_limit = _dim_limit, int(limit)
    return previous


def get_dim_limit() -> int:
    return _dim_limit


@dataclass(frozen=True)
class QuditRegister:
    num_qudits: int
    dim: int
    limit: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.num_qudits < 1:
            raise DomainError(f"num_qudits must be >= 1, got {self.num_qudits}")
        if self.dim < 2:
            raise DomainError(f"dim must be >= 2, got {self.dim}")
        cap = self.limit if self.limit is not None else _dim_limit
        if self.dim**self.num_qudits > cap:
            raise DimensionLimitError(
                f"d**N = {self.dim}**{self.num_qudits} exceeds limit {cap}"
            )

    @property
    def size(self) -> int:
        return self.dim**self.num_qudits

    @property
    def strides(self) -> np.ndarray:
        return self.dim ** np.arange(self.num_qudits, dtype=np.int64)

    def digits(self) -> np.ndarray:
        """All assignments as an integer array of shape ``(d**N, N)``."""
        idx = np.arange(self.size, dtype=np.int64)
        return (idx[:, None] // self.strides[None, :]) % self.dim


def _check_assignment(register: QuditRegister, digits: Sequence[int]) -> tuple[int, ...]:
    z = tuple(int(v) for v in digits)
    if len(z) != register.num_qudits:
        raise DomainError(f"assignment length {len(z)} != N = {register.num_qudits}")
    for j, v in enumerate(z):
        if not 0 <= v < register.dim:
            raise DomainError(f"digit z[{j}] = {v} outside [0, {register.dim - 1}]")
    return z


def index_of(register: QuditRegister, assignment: Sequence[int]) -> int:
    z = _check_assignment(register, assignment)
    index = 0
    for j in reversed(range(len(z))):
        index = index * register.dim + z[j]
    return index


def assignment_of(register: QuditRegister, index: int) -> tuple[int, ...]:
    index = int(index)
    if not 0 <= index < register.size:
        raise DomainError(f"index {index} outside [0, {register.size})")
    out = []
    for _ in range(register.num_qudits):
        index, digit = divmod(index, register.dim)
        out.append(digit)
    return tuple(out)


@dataclass
class StateVector:
    register: QuditRegister
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.register.size,):
            raise DomainError(
                f"amplitude vector shape {self.amplitudes.shape} != ({self.register.size},)"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        a = self.amplitudes
        return a.real * a.real + a.imag * a.imag

    def copy(self) -> StateVector:
        return StateVector(self.register, self.amplitudes.copy())


def uniform_state(register: QuditRegister) -> StateVector:
    amp = np.full(register.size, register.size**-0.5, dtype=np.complex128)
    return StateVector(register, amp)


def basis_state(register: QuditRegister, index_or_assignment) -> StateVector:
    if np.ndim(index_or_assignment) == 0:
        index = int(index_or_assignment)
        assignment_of(register, index)  # range check
    else:
        index = index_of(register, index_or_assignment)
    amp = np.zeros(register.size, dtype=np.complex128)
    amp[index] = 1.0
    return StateVector(register, amp)


def probability(state: StateVector, index: int) -> float:
    index = int(index)
    if not 0 <= index < state.register.size:
        raise DomainError(f"index {index} outside [0, {state.register.size})")
    return float(abs(state.amplitudes[index]) ** 2)


def sample(state: StateVector, rng_seed, count: int) -> list[tuple[int, ...]]:
    """Draw ``count`` i.i.d. basis assignments from ``|<z|psi>|^2``.

    Inverse-CDF sampling with a PCG64 generator seeded by ``rng_seed``.
    """
    return [assignment_of(state.register, i) for i in sample_indices(state, rng_seed, count)]


def sample_indices(state: StateVector, rng_seed, count: int) -> np.ndarray:
    if abs(state.norm - 1.0) > 1e-6:
        raise StateError(f"cannot sample from unnormalized state (norm {state.norm:.3g})")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    cdf = np.cumsum(state.probabilities())
    cdf /= cdf[-1]
    u = rng.random(int(count))
    return np.minimum(np.searchsorted(cdf, u, side="right"), state.register.size - 1)


def inner_product(a: StateVector, b: StateVector) -> complex:
    if a.register != b.register:
        raise DomainError("inner product of states on different registers")
    return complex(np.vdot(a.amplitudes, b.amplitudes))
