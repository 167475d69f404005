"""Local d x d operators and their action on single qudit axes."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from quditqaoa import _kernels
from quditqaoa.register import DomainError, StateVector

HERMITIAN_TOL = 1e-12
EIG_RESIDUAL_TOL = 1e-12


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LocalOperator:
    dim: int
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.shape != (self.dim, self.dim):
            raise DomainError(f"matrix shape {m.shape} != ({self.dim}, {self.dim})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T))) < tol

    def is_unitary(self, tol: float = HERMITIAN_TOL) -> bool:
        err = self.matrix.conj().T @ self.matrix - np.eye(self.dim)
        return float(np.max(np.abs(err))) < tol

    @property
    def dagger(self) -> LocalOperator:
        return LocalOperator(self.dim, self.matrix.conj().T, self.name + "^dag")

    def __matmul__(self, other: LocalOperator) -> LocalOperator:
        return LocalOperator(self.dim, self.matrix @ other.matrix)

    def power(self, k: int) -> LocalOperator:
        return LocalOperator(self.dim, np.linalg.matrix_power(self.matrix, k))


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _check_dim(d: int) -> int:
    d = int(d)
    if d < 2:
        raise DomainError(f"qudit dimension must be >= 2, got {d}")
    return d


def _m_values(d: int) -> np.ndarray:
    # m = z - (d-1)/2 for z = 0 .. d-1
    return np.arange(d) - (d - 1) / 2.0


def lz_matrix(d: int) -> LocalOperator:
    d = _check_dim(d)
    return LocalOperator(d, np.diag(_m_values(d)), "Lz")


def lplus_matrix(d: int) -> LocalOperator:
    """Raising operator: ``L+ |l,m> = sqrt((l-m)(l+m+1)) |l,m+1>``."""
    d = _check_dim(d)
    ell = (d - 1) / 2.0
    m = _m_values(d)
    mat = np.zeros((d, d))
    for z in range(d - 1):
        mat[z + 1, z] = np.sqrt((ell - m[z]) * (ell + m[z] + 1))
    return LocalOperator(d, mat, "L+")


def lminus_matrix(d: int) -> LocalOperator:
    d = _check_dim(d)
    ell = (d - 1) / 2.0
    m = _m_values(d)
    mat = np.zeros((d, d))
    for z in range(1, d):
        mat[z - 1, z] = np.sqrt((ell + m[z]) * (ell - m[z] + 1))
    return LocalOperator(d, mat, "L-")


def lx_matrix(d: int) -> LocalOperator:
    lp, lm = lplus_matrix(d), lminus_matrix(d)
    return LocalOperator(lp.dim, (lp.matrix + lm.matrix) / 2, "Lx")


def ly_matrix(d: int) -> LocalOperator:
    lp, lm = lplus_matrix(d), lminus_matrix(d)
    return LocalOperator(lp.dim, (lp.matrix - lm.matrix) / 2j, "Ly")


def gen_z_matrix(d: int) -> LocalOperator:
    """Clock operator ``Z|z> = exp(2 pi i z / d)|z>``."""
    d = _check_dim(d)
    return LocalOperator(d, np.diag(np.exp(2j * np.pi * np.arange(d) / d)), "Z")


def gen_x_matrix(d: int) -> LocalOperator:
    """Shift operator ``X|z> = |(z+1) mod d>``."""
    d = _check_dim(d)
    mat = np.zeros((d, d))
    mat[(np.arange(d) + 1) % d, np.arange(d)] = 1.0
    return LocalOperator(d, mat, "X")


def identity(d: int) -> LocalOperator:
    return LocalOperator(_check_dim(d), np.eye(d), "I")


def spectral_decomposition(op: LocalOperator) -> SpectralDecomposition:
    if not op.is_hermitian():
        raise DomainError(f"operator {op.name or '?'} is not Hermitian")
    return _spectral(op.matrix.tobytes(), op.dim)


@lru_cache(maxsize=256)
def _spectral(key: bytes, dim: int) -> SpectralDecomposition:
    mat = np.frombuffer(key, dtype=np.complex128).reshape(dim, dim)
    vals, vecs = np.linalg.eigh(mat)
    dec = SpectralDecomposition(vals, vecs)
    residual = float(np.max(np.abs(mat @ vecs - vecs * vals)))
    if residual > EIG_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(vals)))):
        raise EigensolverError(f"eigensolver residual {residual:.2e} above tolerance")
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return dec


def exp_hermitian(op: LocalOperator, angle: float) -> LocalOperator:
    """``exp(-i * angle * op)`` for Hermitian ``op`` via its eigenbasis."""
    dec = spectral_decomposition(op)
    v = dec.eigenvectors
    u = (v * np.exp(-1j * angle * dec.eigenvalues)) @ v.conj().T
    return LocalOperator(op.dim, u, f"exp(-i*{angle:g}*{op.name})")


def apply_local(state: StateVector, qudit: int, op: LocalOperator) -> StateVector:
    """Return a new state with ``op`` acting on axis ``qudit``."""
    reg = state.register
    if not 0 <= qudit < reg.num_qudits:
        raise DomainError(f"qudit {qudit} outside [0, {reg.num_qudits})")
    if op.dim != reg.dim:
        raise DomainError(f"operator dim {op.dim} != register dim {reg.dim}")
    psi = state.amplitudes.copy()
    _kernels.apply_local(psi, op.matrix, reg.dim, reg.dim**qudit)
    return StateVector(reg, psi)


def embed(op, qudit: int, num_qudits: int) -> np.ndarray:
    """Dense ``d**N`` matrix of ``op`` on one qudit, identity elsewhere.

    Kronecker factors run from qudit N-1 (leftmost) down to qudit 0 so the
    result matches the little-endian basis order.
    """
    mat = op.matrix if isinstance(op, LocalOperator) else np.asarray(op)
    d = mat.shape[0]
    out = np.ones((1, 1), dtype=np.complex128)
    for j in reversed(range(num_qudits)):
        out = np.kron(out, mat if j == qudit else np.eye(d))
    return out


def commutator(a: LocalOperator, b: LocalOperator) -> np.ndarray:
    return a.matrix @ b.matrix - b.matrix @ a.matrix
