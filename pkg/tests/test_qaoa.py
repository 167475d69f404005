from __future__ import annotations

import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from quditqaoa.encoding import DiagonalHamiltonian, diagonal_from_cost
from quditqaoa.operators import embed, lx_matrix
from quditqaoa.qaoa import (
    CircuitObjective,
    MixerSpec,
    QaoaParams,
    TrialState,
    apply_mixer,
    apply_phase_separator,
    energy,
    energy_sampled,
    evolve,
    mixer_unitary,
    top_k_candidates,
)
from quditqaoa.register import DomainError, QuditRegister, StateVector, basis_state, uniform_state


def random_state(reg, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=reg.size) + 1j * rng.normal(size=reg.size)
    return StateVector(reg, a / np.linalg.norm(a))


def dense_circuit(reg, H, params):
    """Full d**N matrices for every gate."""
    n, d = reg.num_qudits, reg.dim
    hm = sum(embed(lx_matrix(d), q, n) for q in range(n))
    psi = uniform_state(reg).amplitudes
    for g, b in zip(params.gammas, params.betas):
        psi = np.exp(-1j * g * H.values) * psi
        psi = expm(-1j * b * hm) @ psi
    return psi


def test_params():
    p = QaoaParams.from_vector([1, 2, 3, 4])
    assert p.depth == 2 and list(p.gammas) == [1, 2] and list(p.betas) == [3, 4]
    assert list(p.to_vector()) == [1, 2, 3, 4]
    with pytest.raises(DomainError):
        QaoaParams([1, 2], [1])
    with pytest.raises(DomainError):
        QaoaParams([], [])
    with pytest.raises(DomainError):
        QaoaParams.from_vector([1, 2, 3])


def test_mixer_spec_validation():
    with pytest.raises(DomainError):
        MixerSpec("dynamical_decoupling")
    with pytest.raises(DomainError):
        MixerSpec("other")


def test_phase_separator_examples(backend):
    reg = QuditRegister(1, 3)
    H = diagonal_from_cost(reg, lambda z: z[0])
    s = uniform_state(reg)
    assert np.array_equal(apply_phase_separator(s, H, 0.0).amplitudes, s.amplitudes)
    out = apply_phase_separator(s, H, np.pi).amplitudes
    assert np.allclose(out, np.array([1, -1, 1]) / np.sqrt(3))
    b = basis_state(reg, 2)
    assert np.allclose(apply_phase_separator(b, H, 0.7).probabilities(), b.probabilities())
    r = random_state(QuditRegister(3, 3), 0)
    H3 = DiagonalHamiltonian(r.register, np.random.default_rng(1).normal(size=27))
    assert np.max(np.abs(np.abs(apply_phase_separator(r, H3, 2.3).amplitudes) - np.abs(r.amplitudes))) < 1e-12
    with pytest.raises(DomainError):
        apply_phase_separator(s, DiagonalHamiltonian(QuditRegister(1, 2), [0, 1]), 1.0)


def test_mixer_examples(backend):
    reg = QuditRegister(2, 3)
    s = random_state(reg, 3)
    assert np.allclose(apply_mixer(s, 0.0).amplitudes, s.amplitudes)
    beta = 0.83
    u = mixer_unitary(2, beta)
    assert np.allclose(u, [[np.cos(beta / 2), -1j * np.sin(beta / 2)], [-1j * np.sin(beta / 2), np.cos(beta / 2)]])
    assert np.allclose(mixer_unitary(2, 4 * np.pi), np.eye(2), atol=1e-9)


@pytest.mark.parametrize("d,n", [(2, 3), (3, 3), (4, 2)])
def test_mixer_matches_global_exponential(backend, d, n):
    reg = QuditRegister(n, d)
    s = random_state(reg, d + n)
    hm = sum(embed(lx_matrix(d), q, n) for q in range(n))
    expect = expm(-1j * 1.1 * hm) @ s.amplitudes
    assert np.max(np.abs(apply_mixer(s, 1.1).amplitudes - expect)) < 1e-9


def test_depth3_dense_oracle(backend):
    reg = QuditRegister(3, 3)
    rng = np.random.default_rng(4)
    H = DiagonalHamiltonian(reg, rng.normal(size=27))
    params = QaoaParams(rng.uniform(0, 2 * np.pi, 3), rng.uniform(0, np.pi, 3))
    got = evolve(uniform_state(reg), H, params).state.amplitudes
    assert np.max(np.abs(got - dense_circuit(reg, H, params))) < 1e-9


def test_evolve_trivia(backend):
    reg = QuditRegister(2, 3)
    H = DiagonalHamiltonian(reg, np.arange(9.0))
    u = uniform_state(reg)
    t = evolve(u, H, QaoaParams.zeros(1))
    assert np.allclose(t.state.amplitudes, u.amplitudes)
    assert energy(t, H) == pytest.approx(H.values.mean())


def test_norm_drift_p8(backend):
    reg = QuditRegister(6, 3)
    rng = np.random.default_rng(8)
    H = DiagonalHamiltonian(reg, rng.normal(size=reg.size))
    params = QaoaParams(rng.uniform(0, 7, 8), rng.uniform(0, 4, 8))
    t = evolve(uniform_state(reg), H, params)
    assert abs(t.state.norm - 1) < 1e-9


def test_energy_bounds_and_basis():
    reg = QuditRegister(3, 3)
    rng = np.random.default_rng(2)
    H = DiagonalHamiltonian(reg, rng.normal(size=27))
    for seed in range(10):
        p = QaoaParams(rng.uniform(0, 6, 2), rng.uniform(0, 3, 2))
        e = energy(evolve(uniform_state(reg), H, p), H)
        assert H.min - 1e-9 <= e <= H.max + 1e-9
    b = TrialState(basis_state(reg, 5), QaoaParams.zeros(1))
    assert energy(b, H) == H.values[5]


def test_energy_sampled():
    reg = QuditRegister(1, 3)
    H = diagonal_from_cost(reg, lambda z: z[0])
    t = evolve(uniform_state(reg), H, QaoaParams.zeros(1))
    shots = 100_000
    est = energy_sampled(t, H, shots, 3)
    assert abs(est - 1.0) < 3 * np.sqrt(2 / 3) / np.sqrt(shots)
    assert energy_sampled(t, H, 100, 5) == energy_sampled(t, H, 100, 5)
    b = TrialState(basis_state(reg, 2), QaoaParams.zeros(1))
    assert energy_sampled(b, H, 17, 0) == 2.0


def test_top_k():
    reg = QuditRegister(2, 3)
    H = DiagonalHamiltonian(reg, np.array([5, 4, 3, 2, 1, 0, 6, 7, 8.0]))
    b = TrialState(basis_state(reg, 4), QaoaParams.zeros(1))
    c = top_k_candidates(b, 1, H)
    assert c[0].assignment == (1, 1) and c[0].probability == 1.0
    u = TrialState(uniform_state(reg), QaoaParams.zeros(1))
    all_c = top_k_candidates(u, 9, H)
    assert [x.cost for x in all_c] == sorted(H.values)
    # probability ties are broken by index: K=3 of uniform picks indices 0, 1, 2
    assert sorted(x.index for x in top_k_candidates(u, 3, H)) == [0, 1, 2]
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert len(top_k_candidates(u, 20, H)) == 9
        assert w
    with pytest.raises(DomainError):
        top_k_candidates(u, 0, H)


def test_circuit_objective_matches_evolve(backend):
    reg = QuditRegister(4, 3)
    rng = np.random.default_rng(11)
    H = DiagonalHamiltonian(reg, rng.integers(0, 5, size=81).astype(float))
    E = DiagonalHamiltonian(reg, rng.normal(size=81))
    obj = CircuitObjective(H, E)
    x = rng.uniform(0, 3, 6)
    t = evolve(uniform_state(reg), H, QaoaParams.from_vector(x))
    assert obj(x) == pytest.approx(energy(t, E), abs=1e-12)
    assert np.max(np.abs(obj.state(x) - t.state.amplitudes)) < 1e-12


def test_color_reversal_symmetry():
    from quditqaoa.problems import bundled_coloring

    prob = bundled_coloring()
    reg = prob.register
    H = prob.diagonal()
    digits = reg.digits()
    rev = ((reg.dim - 1 - digits) @ reg.strides).astype(int)
    assert np.array_equal(H.values, H.values[rev])
    rng = np.random.default_rng(0)
    for p in (1, 2, 3):
        params = QaoaParams(rng.uniform(0, 2 * np.pi, p), rng.uniform(0, np.pi, p))
        probs = evolve(uniform_state(reg), H, params).probabilities()
        assert np.max(np.abs(probs - probs[rev])) < 1e-9
