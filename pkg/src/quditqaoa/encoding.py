"""Cost functions as diagonal operators, generalized-Z and Lz polynomials.

Three interchangeable representations of a classical cost ``C(z)``:

* ``DiagonalHamiltonian``: the table ``C(z)`` over all ``d**N`` basis states.
* ``ZPolynomial``: ``sum_a c_a prod_j Z_j**a_j`` with ``c_a = Chat(a) / d**N``
  where ``Chat`` is the N-dimensional discrete Fourier transform of ``C``.
* ``LzPolynomial``: ``sum_p c_p prod_j Lz_j**p_j`` obtained by substituting
  ``z_j -> (d-1)/2 + Lz_j`` into a polynomial cost.
"""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from quditqaoa.register import DomainError, QuditRegister, assignment_of

PRUNE_TOL = 1e-12
IMAG_DISCARD_TOL = 1e-9
IMAG_ERROR_TOL = 1e-6


class EncodingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiagonalHamiltonian:
    register: QuditRegister
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.register.size,):
            raise EncodingError(f"diagonal length {v.shape} != ({self.register.size},)")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise EncodingError(
                f"non-finite cost at z={assignment_of(self.register, bad)}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    def __add__(self, other: DiagonalHamiltonian) -> DiagonalHamiltonian:
        if other.register != self.register:
            raise DomainError("register mismatch")
        return DiagonalHamiltonian(self.register, self.values + other.values)

    def scaled(self, factor: float) -> DiagonalHamiltonian:
        return DiagonalHamiltonian(self.register, factor * self.values)


@dataclass(frozen=True, eq=False)
class FourierCoefficients:
    register: QuditRegister
    coeffs: np.ndarray


@dataclass(eq=False)
class ZPolynomial:
    """Exponent vector ``(a_0, ..., a_{N-1})`` -> complex coefficient."""

    register: QuditRegister
    terms: dict[tuple[int, ...], complex] = field(default_factory=dict)

    def __post_init__(self):
        d, n = self.register.dim, self.register.num_qudits
        clean = {}
        for a, c in self.terms.items():
            a = tuple(int(x) for x in a)
            if len(a) != n or any(not 0 <= x < d for x in a):
                raise EncodingError(f"exponent vector {a} invalid for d={d}, N={n}")
            clean[a] = clean.get(a, 0j) + complex(c)
        self.terms = clean

    def __len__(self):
        return len(self.terms)


@dataclass(eq=False)
class LzPolynomial:
    """Per-qudit power vector ``(p_0, ..., p_{N-1})`` -> real coefficient."""

    register: QuditRegister
    terms: dict[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        n = self.register.num_qudits
        clean: dict[tuple[int, ...], float] = {}
        for p, c in self.terms.items():
            p = tuple(int(x) for x in p)
            if len(p) != n or any(x < 0 for x in p):
                raise EncodingError(f"power vector {p} invalid for N={n}")
            clean[p] = clean.get(p, 0.0) + float(c)
        self.terms = clean

    def add(self, powers: Mapping[int, int], coeff: float) -> None:
        """Add ``coeff * prod_{q in powers} Lz_q**powers[q]``."""
        p = [0] * self.register.num_qudits
        for q, k in powers.items():
            p[q] += k
        key = tuple(p)
        self.terms[key] = self.terms.get(key, 0.0) + float(coeff)

    @property
    def max_power(self) -> int:
        return max((max(p) for p in self.terms), default=0)


# ------------------------------------------------------------------ diagonal

def diagonal_from_cost(register: QuditRegister, cost: Callable[[tuple], float]) -> DiagonalHamiltonian:
    values = np.empty(register.size)
    for i in range(register.size):
        values[i] = cost(assignment_of(register, i))
    return DiagonalHamiltonian(register, values)


# ----------------------------------------------------------------------- DFT

def _tensor(register: QuditRegister, flat: np.ndarray) -> np.ndarray:
    # C-order reshape puts qudit N-1 on axis 0 and qudit 0 on the last axis
    return flat.reshape((register.dim,) * register.num_qudits)


def dft_cost(diagonal: DiagonalHamiltonian) -> FourierCoefficients:
    """``Chat(a) = sum_z C(z) exp(-2 pi i a.z / d)``, indexed like basis states."""
    reg = diagonal.register
    coeffs = np.fft.fftn(_tensor(reg, diagonal.values.astype(np.complex128))).reshape(-1)
    return FourierCoefficients(reg, coeffs)


def idft_cost(fourier: FourierCoefficients) -> np.ndarray:
    """Inverse transform; returns the complex table ``C(z)``."""
    reg = fourier.register
    return np.fft.ifftn(_tensor(reg, fourier.coeffs)).reshape(-1)


def naive_dft(diagonal: DiagonalHamiltonian) -> np.ndarray:
    """O(d**2N) reference transform, kept as an independent check."""
    reg = diagonal.register
    digits = reg.digits()
    phase = np.exp(-2j * np.pi * (digits @ digits.T) / reg.dim)
    return phase @ diagonal.values


# -------------------------------------------------------------- Z polynomial

def _prune(coeffs: np.ndarray, tol: float = PRUNE_TOL) -> np.ndarray:
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    return np.flatnonzero(np.abs(coeffs) >= tol * scale) if scale > 0 else np.array([], dtype=int)


def z_polynomial_from_cost(diagonal: DiagonalHamiltonian) -> ZPolynomial:
    reg = diagonal.register
    weights = dft_cost(diagonal).coeffs / reg.size
    terms = {assignment_of(reg, int(i)): complex(weights[i]) for i in _prune(weights)}
    return ZPolynomial(reg, terms)


def _real_or_raise(value: complex, where: str) -> float:
    if abs(value.imag) > IMAG_ERROR_TOL:
        raise EncodingError(f"imaginary residue {value.imag:.3g} at {where}")
    return float(value.real)


def evaluate_z_polynomial(poly: ZPolynomial, assignment: Sequence[int]) -> float:
    d = poly.register.dim
    z = np.asarray(assignment)
    total = 0j
    for a, c in poly.terms.items():
        total += c * np.exp(2j * np.pi * float(np.dot(a, z)) / d)
    return _real_or_raise(total, f"z={tuple(int(x) for x in z)}")


def z_polynomial_values(poly: ZPolynomial) -> np.ndarray:
    """Evaluate on every basis state at once; returns the complex table."""
    reg = poly.register
    if not poly.terms:
        return np.zeros(reg.size, dtype=np.complex128)
    exps = np.array(list(poly.terms.keys()), dtype=np.int64)
    coeffs = np.array(list(poly.terms.values()), dtype=np.complex128)
    phases = np.exp(2j * np.pi * ((reg.digits() @ exps.T) % reg.dim) / reg.dim)
    return phases @ coeffs


def diagonal_from_z_polynomial(poly: ZPolynomial) -> DiagonalHamiltonian:
    vals = z_polynomial_values(poly)
    worst = int(np.argmax(np.abs(vals.imag))) if vals.size else 0
    if vals.size and abs(vals[worst].imag) > IMAG_ERROR_TOL:
        raise EncodingError(
            f"imaginary residue {vals[worst].imag:.3g} at z={assignment_of(poly.register, worst)}"
        )
    return DiagonalHamiltonian(poly.register, vals.real)


def sparsity(poly: ZPolynomial, tol: float = PRUNE_TOL) -> int:
    return sum(1 for c in poly.terms.values() if abs(c) >= tol)


# ------------------------------------------------------------- Lz polynomial

def diagonal_from_lz_polynomial(poly: LzPolynomial, register: QuditRegister | None = None) -> DiagonalHamiltonian:
    reg = register or poly.register
    if reg.num_qudits != poly.register.num_qudits:
        raise EncodingError("register size does not match polynomial")
    d = reg.dim
    if poly.max_power >= d:
        raise EncodingError(
            f"Lz power {poly.max_power} >= d={d}; reduce with reduce_lz_powers first"
        )
    m = reg.digits() - (d - 1) / 2.0
    values = np.zeros(reg.size)
    for powers, c in poly.terms.items():
        term = np.full(reg.size, c)
        for q, k in enumerate(powers):
            if k:
                term *= m[:, q] ** k
        values += term
    return DiagonalHamiltonian(reg, values)


def reduce_lz_powers(poly: LzPolynomial) -> LzPolynomial:
    """Rewrite powers ``>= d`` using the minimal polynomial of Lz.

    ``prod_m (Lz - m) = 0`` on a d-level space, so ``Lz**k`` equals the
    remainder of ``x**k`` divided by that polynomial. Never applied
    implicitly.
    """
    d = poly.register.dim
    m = np.arange(d) - (d - 1) / 2.0
    minimal = np.polynomial.polynomial.polyfromroots(m)
    cache: dict[int, np.ndarray] = {}

    def reduced(k: int) -> np.ndarray:
        if k not in cache:
            mono = np.zeros(k + 1)
            mono[k] = 1.0
            cache[k] = mono if k < d else np.polynomial.polynomial.polydiv(mono, minimal)[1]
        return cache[k]

    out = LzPolynomial(poly.register)
    for powers, c in poly.terms.items():
        factors = [reduced(k) for k in powers]
        for combo in itertools.product(*(range(len(f)) for f in factors)):
            w = c
            for f, j in zip(factors, combo):
                w *= f[j]
            if w != 0.0:
                key = tuple(combo)
                out.terms[key] = out.terms.get(key, 0.0) + float(w)
    return out


def monomials_from_diagonal(diagonal: DiagonalHamiltonian) -> dict[tuple[int, ...], float]:
    """Interpolate ``C`` as ``sum_p c_p prod_j z_j**p_j`` with all ``p_j < d``.

    Solves the per-axis Vandermonde system on nodes ``z = 0..d-1``.
    """
    reg = diagonal.register
    d = reg.dim
    vinv = np.linalg.inv(np.vander(np.arange(d, dtype=float), d, increasing=True))
    t = _tensor(reg, diagonal.values.copy())
    for axis in range(reg.num_qudits):
        t = np.moveaxis(np.tensordot(vinv, t, axes=([1], [axis])), 0, axis)
    flat = t.reshape(-1)
    return {assignment_of(reg, i): float(flat[i]) for i in range(reg.size) if flat[i] != 0.0}


def lz_polynomial_from_monomials(
    register: QuditRegister, monomials: Mapping[tuple[int, ...], float]
) -> LzPolynomial:
    """Substitute ``z_j -> l + Lz_j`` (``l = (d-1)/2``) and expand binomially."""
    ell = (register.dim - 1) / 2.0
    out = LzPolynomial(register)
    for powers, c in monomials.items():
        expansions = [
            [(j, math.comb(k, j) * ell ** (k - j)) for j in range(k + 1)] for k in powers
        ]
        for combo in itertools.product(*expansions):
            w = c
            for _, b in combo:
                w *= b
            key = tuple(j for j, _ in combo)
            out.terms[key] = out.terms.get(key, 0.0) + w
    return out


# ------------------------------------------------------------- serialization

def format_z_polynomial(poly: ZPolynomial) -> str:
    """One term per line: ``a_0 ... a_{N-1}  re  im`` (little-endian qudits)."""
    reg = poly.register
    buf = io.StringIO()
    buf.write(f"# z-polynomial d={reg.dim} N={reg.num_qudits} order=little-endian\n")
    for a in sorted(poly.terms):
        c = poly.terms[a]
        buf.write(" ".join(str(x) for x in a) + f"  {c.real:.17g}  {c.imag:.17g}\n")
    return buf.getvalue()


def parse_z_polynomial(text: str | Iterable[str], register: QuditRegister | None = None) -> ZPolynomial:
    lines = text.splitlines() if isinstance(text, str) else list(text)
    reg = register
    terms: dict[tuple[int, ...], complex] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if reg is None and "d=" in line and "N=" in line:
                fields = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
                reg = QuditRegister(int(fields["N"]), int(fields["d"]))
            continue
        parts = line.split()
        if len(parts) < 3:
            raise EncodingError(f"line {lineno}: expected exponents followed by re im")
        a = tuple(int(x) for x in parts[:-2])
        terms[a] = terms.get(a, 0j) + complex(float(parts[-2]), float(parts[-1]))
    if reg is None:
        raise EncodingError("register unknown: no header and none supplied")
    return ZPolynomial(reg, terms)
