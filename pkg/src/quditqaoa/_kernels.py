"""State-vector inner loops.

Every kernel exists twice: a numba ``@njit`` version and a vectorized numpy
version with identical semantics. The numba path is used when numba imports
and the environment variable ``QUDITQAOA_DISABLE_NUMBA`` is unset (or "0").
Setting it to any other value forces the numpy path, which is also what runs
when numba is unavailable.

All kernels act on flat ``complex128`` vectors of length ``d**N`` in
little-endian order (qudit 0 has stride 1, qudit ``q`` has stride ``d**q``)
and mutate ``psi`` in place.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

ENV_FLAG = "QUDITQAOA_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "0").strip().lower() in ("", "0", "false", "no")


HAVE_NUMBA = numba is not None


# ---------------------------------------------------------------- numpy path

def apply_local_numpy(psi, op, dim, stride):
    n = psi.shape[0]
    view = psi.reshape(n // (dim * stride), dim, stride)
    view[...] = np.einsum("ij,ajb->aib", op, view)


def apply_local_all_numpy(psi, op, dim, num_qudits):
    stride = 1
    for _ in range(num_qudits):
        apply_local_numpy(psi, op, dim, stride)
        stride *= dim


def apply_phase_numpy(psi, values, gamma):
    psi *= np.exp(-1j * gamma * values)


def expectation_numpy(psi, values):
    return float(np.dot(psi.real * psi.real + psi.imag * psi.imag, values))


def evolve_numpy(psi, values, gammas, mixers, dim, num_qudits):
    for layer in range(gammas.shape[0]):
        apply_phase_numpy(psi, values, gammas[layer])
        apply_local_all_numpy(psi, mixers[layer], dim, num_qudits)


def evolve_indexed_numpy(psi, levels, inverse, gammas, mixers, dim, num_qudits):
    for layer in range(gammas.shape[0]):
        psi *= np.exp(-1j * gammas[layer] * levels)[inverse]
        apply_local_all_numpy(psi, mixers[layer], dim, num_qudits)


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def apply_local_numba(psi, op, dim, stride):
        n = psi.shape[0]
        block = dim * stride
        tmp = np.empty(dim, dtype=np.complex128)
        for start in range(0, n, block):
            for b in range(stride):
                base = start + b
                for j in range(dim):
                    tmp[j] = psi[base + j * stride]
                for i in range(dim):
                    acc = 0j
                    for j in range(dim):
                        acc += op[i, j] * tmp[j]
                    psi[base + i * stride] = acc

    @numba.njit(cache=True)
    def _all_qubits(psi, op, num_qudits):
        n = psi.shape[0]
        a00, a01, a10, a11 = op[0, 0], op[0, 1], op[1, 0], op[1, 1]
        stride = 1
        for _ in range(num_qudits):
            for start in range(0, n, 2 * stride):
                for b in range(start, start + stride):
                    x0 = psi[b]
                    x1 = psi[b + stride]
                    psi[b] = a00 * x0 + a01 * x1
                    psi[b + stride] = a10 * x0 + a11 * x1
            stride *= 2

    @numba.njit(cache=True)
    def _all_qutrits(psi, op, num_qudits):
        n = psi.shape[0]
        a00, a01, a02 = op[0, 0], op[0, 1], op[0, 2]
        a10, a11, a12 = op[1, 0], op[1, 1], op[1, 2]
        a20, a21, a22 = op[2, 0], op[2, 1], op[2, 2]
        stride = 1
        for _ in range(num_qudits):
            for start in range(0, n, 3 * stride):
                for b in range(start, start + stride):
                    x0 = psi[b]
                    x1 = psi[b + stride]
                    x2 = psi[b + 2 * stride]
                    psi[b] = a00 * x0 + a01 * x1 + a02 * x2
                    psi[b + stride] = a10 * x0 + a11 * x1 + a12 * x2
                    psi[b + 2 * stride] = a20 * x0 + a21 * x1 + a22 * x2
            stride *= 3

    @numba.njit(cache=True)
    def apply_local_all_numba(psi, op, dim, num_qudits):
        # unrolled paths for the common small dimensions
        if dim == 2:
            _all_qubits(psi, op, num_qudits)
        elif dim == 3:
            _all_qutrits(psi, op, num_qudits)
        else:
            stride = 1
            for _ in range(num_qudits):
                apply_local_numba(psi, op, dim, stride)
                stride *= dim

    @numba.njit(cache=True)
    def apply_phase_numba(psi, values, gamma):
        for i in range(psi.shape[0]):
            angle = -gamma * values[i]
            c = math.cos(angle)
            s = math.sin(angle)
            re = psi[i].real
            im = psi[i].imag
            psi[i] = complex(re * c - im * s, re * s + im * c)

    @numba.njit(cache=True)
    def expectation_numba(psi, values):
        acc = 0.0
        for i in range(psi.shape[0]):
            z = psi[i]
            acc += (z.real * z.real + z.imag * z.imag) * values[i]
        return acc

    @numba.njit(cache=True)
    def evolve_numba(psi, values, gammas, mixers, dim, num_qudits):
        for layer in range(gammas.shape[0]):
            apply_phase_numba(psi, values, gammas[layer])
            apply_local_all_numba(psi, mixers[layer], dim, num_qudits)

    @numba.njit(cache=True)
    def evolve_indexed_numba(psi, levels, inverse, gammas, mixers, dim, num_qudits):
        table = np.empty(levels.shape[0], dtype=np.complex128)
        for layer in range(gammas.shape[0]):
            for k in range(levels.shape[0]):
                angle = -gammas[layer] * levels[k]
                table[k] = complex(math.cos(angle), math.sin(angle))
            for i in range(psi.shape[0]):
                psi[i] = psi[i] * table[inverse[i]]
            apply_local_all_numba(psi, mixers[layer], dim, num_qudits)

else:  # pragma: no cover
    apply_local_numba = apply_local_numpy
    apply_local_all_numba = apply_local_all_numpy
    apply_phase_numba = apply_phase_numpy
    expectation_numba = expectation_numpy
    evolve_numba = evolve_numpy
    evolve_indexed_numba = evolve_indexed_numpy


_NUMPY = {
    "apply_local": apply_local_numpy,
    "apply_local_all": apply_local_all_numpy,
    "apply_phase": apply_phase_numpy,
    "expectation": expectation_numpy,
    "evolve": evolve_numpy,
    "evolve_indexed": evolve_indexed_numpy,
}
_NUMBA = {
    "apply_local": apply_local_numba,
    "apply_local_all": apply_local_all_numba,
    "apply_phase": apply_phase_numba,
    "expectation": expectation_numba,
    "evolve": evolve_numba,
    "evolve_indexed": evolve_indexed_numba,
}

_active = _NUMBA if (HAVE_NUMBA and _numba_requested()) else _NUMPY


def backend() -> str:
    """Name of the active kernel set, ``"numba"`` or ``"numpy"``."""
    return "numba" if _active is _NUMBA and HAVE_NUMBA else "numpy"


def use_backend(name: str) -> str:
    """Switch kernel set at runtime; returns the previously active name."""
    global _active
    previous = backend()
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        _active = _NUMBA
    elif name == "numpy":
        _active = _NUMPY
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def apply_local(psi, op, dim, stride):
    _active["apply_local"](psi, op, dim, stride)


def apply_local_all(psi, op, dim, num_qudits):
    _active["apply_local_all"](psi, op, dim, num_qudits)


def apply_phase(psi, values, gamma):
    _active["apply_phase"](psi, values, float(gamma))


def expectation(psi, values):
    return float(_active["expectation"](psi, values))


def evolve(psi, values, gammas, mixers, dim, num_qudits):
    """Run ``len(gammas)`` phase+mixer layers on ``psi`` in place.

    ``mixers`` has shape ``(p, dim, dim)``: the local mixer unitary of each
    layer, applied identically to every qudit.
    """
    _active["evolve"](psi, values, gammas, mixers, dim, num_qudits)


def phase_levels(values) -> tuple[np.ndarray, np.ndarray]:
    """Distinct diagonal entries and the index of each entry into them."""
    levels, inverse = np.unique(np.asarray(values, dtype=np.float64), return_inverse=True)
    return levels, inverse.astype(np.int64).reshape(-1)


def evolve_indexed(psi, levels, inverse, gammas, mixers, dim, num_qudits):
    """Same as :func:`evolve` with the diagonal given as ``levels[inverse]``.

    Only ``len(levels)`` exponentials are taken per layer, which pays off
    whenever the cost takes few distinct values.
    """
    _active["evolve_indexed"](psi, levels, inverse, gammas, mixers, dim, num_qudits)
