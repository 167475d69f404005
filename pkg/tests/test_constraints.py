from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm

from quditqaoa.constraints import (
    EQUALITY,
    INEQUALITY,
    AncillaState,
    ConstraintConfigError,
    ConstraintSpec,
    InfeasibleError,
    PenalizedProblem,
    classical_loop_objective,
    conditional_gate_apply,
    dd_mixer_apply,
    feasible_projector,
    feasible_uniform_state,
    penalized_cost,
    penalized_diagonal,
    penalty_value,
    run_conditional_ensemble,
    run_conditional_trajectory,
    symmetrize_operator_dense,
    violation_indicator_diagonal,
)
from quditqaoa.encoding import DiagonalHamiltonian, diagonal_from_cost
from quditqaoa.operators import embed, lx_matrix
from quditqaoa.problems import base_and_constraints, bundled_instances, bundled_coloring, brute_force_optima
from quditqaoa.qaoa import DegenerateEvolutionError, MixerSpec, QaoaParams, TrialState, energy, evolve
from quditqaoa.register import DomainError, QuditRegister, StateVector, basis_state, uniform_state

SUM2 = ConstraintSpec(lambda z: z[0] + z[1] - 2, EQUALITY, name="sum2",
                      vectorized=lambda D: D[:, 0] + D[:, 1] - 2)


def test_penalty_value_examples():
    assert penalty_value(0, EQUALITY, 2) == 0
    assert penalty_value(0, INEQUALITY, 1) == 0
    assert penalty_value(-3, INEQUALITY, 2) == 0
    assert penalty_value(2, EQUALITY, 2) == 4
    assert penalty_value(-2, EQUALITY, 1) == 2
    assert penalty_value(1.5, INEQUALITY, 1) == 1.5
    with pytest.raises(ConstraintConfigError):
        penalty_value(1, EQUALITY, 0)
    g = np.linspace(-3, 3, 13)
    for kind in (EQUALITY, INEQUALITY):
        for a in (1, 2):
            p = penalty_value(g, kind, a)
            assert np.all(p >= 0)
            sat = g == 0 if kind == EQUALITY else g <= 0
            assert np.array_equal(p == 0, sat)


def test_constraint_spec_defaults():
    assert ConstraintSpec(lambda z: 0, EQUALITY).exponent == 2
    assert ConstraintSpec(lambda z: 0, INEQUALITY).exponent == 1
    with pytest.raises(ConstraintConfigError):
        ConstraintSpec(lambda z: 0, "maybe")
    with pytest.raises(ConstraintConfigError):
        ConstraintSpec(lambda z: 0, EQUALITY, weight=-1)


def test_penalized_cost_examples():
    base = lambda z: float(z[0])  # noqa: E731
    assert penalized_cost(base, [])((2, 1)) == 2
    c = penalized_cost(base, [SUM2])
    assert c((1, 1)) == 1
    assert c((2, 2)) == 2 + 4
    prob = bundled_coloring(conflict_weight=20.0)
    bare, cons = base_and_constraints(prob)
    pen = penalized_cost(lambda z: 0.0, cons)
    u, v = prob.edges[0]
    z = [0, 1, 2, 0, 1, 2]
    z_conf = list(z)
    z_conf[v] = z_conf[u]
    assert pen(tuple(z_conf)) - pen(tuple(z)) == pytest.approx(20 * (
        sum(z_conf[a] == z_conf[b] for a, b in prob.edges) - sum(z[a] == z[b] for a, b in prob.edges)))
    # one more conflicting edge costs exactly lambda
    single = ConstraintSpec(lambda z: float(z[0] == z[1]), EQUALITY, exponent=1, weight=20.0)
    assert penalized_cost(lambda z: 0.0, [single])((1, 1)) == 20


def test_penalized_diagonal_matches_pointwise():
    reg = QuditRegister(2, 3)
    base = diagonal_from_cost(reg, lambda z: z[0] * 2 - z[1])
    cons = [SUM2, ConstraintSpec(lambda z: z[0] - 1, INEQUALITY, weight=3.0,
                                 vectorized=lambda D: D[:, 0] - 1)]
    pp = PenalizedProblem(base, cons)
    direct = diagonal_from_cost(reg, penalized_cost(lambda z: z[0] * 2 - z[1], cons))
    assert np.allclose(penalized_diagonal(pp).values, direct.values)
    assert np.all(pp.penalized.values >= base.values)
    assert np.array_equal(pp.feasible_mask(), pp.penalized.values == base.values)


def test_vectorized_matches_scalar():
    reg = QuditRegister(2, 3)
    scalar_only = ConstraintSpec(lambda z: z[0] + z[1] - 2, EQUALITY)
    assert np.array_equal(scalar_only.g_values(reg), SUM2.g_values(reg))


def test_classical_loop_objective():
    reg = QuditRegister(1, 3)
    base = diagonal_from_cost(reg, lambda z: 1.0)
    t = TrialState(uniform_state(reg), QaoaParams.zeros(1))
    assert classical_loop_objective(t, base, []) == pytest.approx(energy(t, base))
    g = ConstraintSpec(lambda z: z[0], EQUALITY, exponent=1, weight=1.0)
    assert classical_loop_objective(t, base, [g]) == pytest.approx(energy(t, base) + 1.0)
    feas = TrialState(basis_state(reg, 0), QaoaParams.zeros(1))
    assert classical_loop_objective(feas, base, [g]) == pytest.approx(energy(feas, base))
    reg2 = QuditRegister(2, 3)
    H = DiagonalHamiltonian(reg2, np.random.default_rng(0).normal(size=9))
    t2 = evolve(uniform_state(reg2), H, QaoaParams([0.4], [0.9]))
    assert classical_loop_objective(t2, H, [SUM2]) >= energy(t2, H)


def test_violation_indicator():
    reg = QuditRegister(1, 3)
    ok = ConstraintSpec(lambda z: 0.0, EQUALITY)
    assert np.all(violation_indicator_diagonal(ok, reg).values == 0)
    eq = ConstraintSpec(lambda z: z[0] - 1, EQUALITY)
    ineq = ConstraintSpec(lambda z: z[0] - 1, INEQUALITY)
    assert list(violation_indicator_diagonal(eq, reg).values) == [1, 0, 1]
    assert list(violation_indicator_diagonal(ineq, reg).values) == [0, 0, 1]


def test_conditional_gate_examples():
    reg = QuditRegister(2, 3)
    feas = AncillaState.attach(basis_state(reg, (1, 1)))
    out = conditional_gate_apply(feas, SUM2)
    assert np.array_equal(out.amplitudes, feas.amplitudes)
    bad = AncillaState.attach(basis_state(reg, (0, 0)))
    out = conditional_gate_apply(bad, SUM2)
    assert out.ancilla_probability(1) == pytest.approx(1)
    assert out.amplitudes[1, 0] == pytest.approx(-1j)
    with pytest.raises(DomainError):
        AncillaState(reg, np.zeros((3, 9)))


def test_conditional_gate_dense_oracle():
    reg = QuditRegister(2, 3)
    rng = np.random.default_rng(3)
    amp = rng.normal(size=(2, 9)) + 1j * rng.normal(size=(2, 9))
    st = AncillaState(reg, amp / np.linalg.norm(amp))
    hg = np.diag(violation_indicator_diagonal(SUM2, reg).values)
    x = np.array([[0, 1], [1, 0]])
    u = expm(-1j * (np.pi / 2) * np.kron(x, hg))  # ancilla is the most significant factor
    got = conditional_gate_apply(st, SUM2).flat()
    assert np.max(np.abs(got - u @ st.flat())) < 1e-9


def _two_qutrit_setup():
    reg = QuditRegister(2, 3)
    base = diagonal_from_cost(reg, lambda z: z[0] - 0.5 * z[1])
    pen = PenalizedProblem(base, [SUM2.with_weight(4.0)]).penalized
    return reg, base, pen


def test_trajectory_never_violated_equals_plain_circuit():
    reg = QuditRegister(2, 3)
    base = diagonal_from_cost(reg, lambda z: z[0] + z[1])
    always = ConstraintSpec(lambda z: 0.0, EQUALITY)
    params = QaoaParams([0.3, 0.8], [0.5, 1.2])
    trial, run = run_conditional_trajectory(uniform_state(reg), base, base, params, None, [always], 5)
    plain = evolve(uniform_state(reg), base, params)
    assert np.allclose(trial.state.amplitudes, plain.state.amplitudes)
    assert run.outcomes == [[[0], [0]]]


def test_trajectory_determinism_and_branching():
    reg, base, pen = _two_qutrit_setup()
    params = QaoaParams([0.3, 0.8, 0.2], [0.5, 1.2, 0.7])
    a = run_conditional_trajectory(uniform_state(reg), base, pen, params, None, [SUM2], 99)
    b = run_conditional_trajectory(uniform_state(reg), base, pen, params, None, [SUM2], 99)
    assert a[1].outcomes == b[1].outcomes
    assert np.array_equal(a[0].state.amplitudes, b[0].state.amplitudes)
    assert abs(a[0].state.norm - 1) < 1e-9
    outs, branches = a[1].outcomes[0], a[1].branches[0]
    assert branches[0] == "base"
    for layer in range(1, 3):
        assert branches[layer] == ("penalized" if outs[layer - 1][0] else "base")


def test_ancilla_frequency_matches_violation_probability():
    reg, base, pen = _two_qutrit_setup()
    params = QaoaParams([0.9], [0.6])
    trajectories = 10_000
    probs, run = run_conditional_ensemble(uniform_state(reg), base, pen, params, None, [SUM2], 2024, trajectories)
    exact_p = float(evolve(uniform_state(reg), base, params).probabilities()[~(SUM2.g_values(reg) == 0)].sum())
    freq = run.frequencies()[0, 0]
    sigma = np.sqrt(exact_p * (1 - exact_p) / trajectories)
    assert abs(freq - exact_p) <= 3 * sigma
    assert abs(probs.sum() - 1) < 1e-9


def test_feasible_projector_examples():
    reg = QuditRegister(2, 3)
    proj = feasible_projector(reg, [SUM2])
    feas = sorted(tuple(z) for z in reg.digits()[proj.feasible_mask])
    assert feas == [(0, 2), (1, 1), (2, 0)]
    assert proj.largest_eigenvalues == (2,)
    assert feasible_projector(reg, []).feasible_mask.all()
    with pytest.raises(InfeasibleError):
        feasible_projector(reg, [ConstraintSpec(lambda z: 1.0, EQUALITY)])
    with pytest.raises(ConstraintConfigError):
        feasible_projector(reg, [ConstraintSpec(lambda z: z[0], INEQUALITY)])
    with pytest.raises(ConstraintConfigError):
        feasible_projector(reg, [ConstraintSpec(lambda z: z[0] / 2, EQUALITY)])


def test_dd_mixer_examples():
    reg = QuditRegister(2, 3)
    proj = feasible_projector(reg, [SUM2])
    s = basis_state(reg, (1, 1))
    assert np.allclose(dd_mixer_apply(s, 0.0, proj).amplitudes, s.amplitudes)
    out = dd_mixer_apply(feasible_uniform_state(proj), 0.77, proj)
    assert proj.leakage(out) == 0.0
    assert abs(out.norm - 1) < 1e-12


def test_dd_circuit_zero_leakage():
    reg = QuditRegister(3, 3)
    g = ConstraintSpec(lambda z: z[0] + z[1] + z[2] - 3, EQUALITY,
                       vectorized=lambda D: D.sum(axis=1) - 3)
    proj = feasible_projector(reg, [g])
    H = DiagonalHamiltonian(reg, np.random.default_rng(1).normal(size=27))
    rng = np.random.default_rng(2)
    for p in range(1, 9):
        params = QaoaParams(rng.uniform(0, 6, p), rng.uniform(0, 3, p))
        t = evolve(feasible_uniform_state(proj), H, params, MixerSpec.decoupled(proj))
        assert proj.leakage(t.state) == 0.0
        assert abs(t.state.norm - 1) < 1e-12


def test_dd_degenerate_raises():
    reg = QuditRegister(1, 3)
    g = ConstraintSpec(lambda z: z[0] - 1, EQUALITY)
    proj = feasible_projector(reg, [g])
    # an infeasible input with beta = 0 has no feasible overlap at all
    with pytest.raises(DegenerateEvolutionError):
        dd_mixer_apply(basis_state(reg, 0), 0.0, proj)


def _dense_mixer(reg, beta):
    return expm(-1j * beta * sum(embed(lx_matrix(reg.dim), q, reg.num_qudits) for q in range(reg.num_qudits)))


def test_dd_matches_symmetrization_oracle():
    reg = QuditRegister(2, 3)
    proj = feasible_projector(reg, [SUM2])
    lam = proj.largest_eigenvalues[0]
    rng = np.random.default_rng(5)
    for beta in rng.uniform(0, np.pi, 4):
        amp = np.where(proj.feasible_mask, rng.normal(size=9) + 1j * rng.normal(size=9), 0)
        s = StateVector(reg, amp / np.linalg.norm(amp))
        sym = symmetrize_operator_dense(_dense_mixer(reg, beta), SUM2, 2 * lam + 1, reg)
        ref = sym @ s.amplitudes
        ref /= np.linalg.norm(ref)
        got = dd_mixer_apply(s, beta, proj).amplitudes
        assert np.max(np.abs(got - ref)) < 1e-9


def test_symmetrization_properties():
    reg = QuditRegister(2, 3)
    g = SUM2.g_values(reg)
    M = _dense_mixer(reg, 0.8)
    assert np.allclose(symmetrize_operator_dense(M, SUM2, 1, reg), M)
    diag_op = np.diag(np.arange(9.0))
    assert np.allclose(symmetrize_operator_dense(diag_op, SUM2, 5, reg), diag_op)
    sym = symmetrize_operator_dense(M, SUM2, 5, reg)
    off = g[:, None] != g[None, :]
    assert np.max(np.abs(sym[off])) < 1e-9
    # averaging only over [0, 2 pi / Lambda) leaves unit-gap blocks coupled
    short = symmetrize_operator_dense(M, SUM2, 5, reg, period=np.pi)
    assert np.max(np.abs(short[off])) > 1e-3
    with pytest.raises(DomainError):
        symmetrize_operator_dense(M, SUM2, 5)


def test_symmetrization_two_commuting_constraints():
    reg = QuditRegister(2, 3)
    g1 = ConstraintSpec(lambda z: z[0] - 1, EQUALITY)
    g2 = ConstraintSpec(lambda z: z[1] - 1, EQUALITY)
    M = _dense_mixer(reg, 1.3)
    a = symmetrize_operator_dense(M, [g1, g2], 3, reg)
    b = symmetrize_operator_dense(M, [g2, g1], 3, reg)
    assert np.allclose(a, b)
    proj = feasible_projector(reg, [g1, g2])
    s = basis_state(reg, (1, 1))
    ref = a @ s.amplitudes
    got = dd_mixer_apply(s, 1.3, proj).amplitudes
    assert np.allclose(got, ref / np.linalg.norm(ref))


def _large_weight(base, cons):
    """A weight that makes the smallest possible penalty exceed the cost range."""
    pen1 = PenalizedProblem(base, [c.with_weight(1.0) for c in cons]).penalized.values - base.values
    positive = pen1[pen1 > 0]
    return (base.max - base.min + 1.0) / positive.min() if positive.size else 1.0


@pytest.mark.parametrize("name", sorted(bundled_instances()))
def test_large_penalty_optima_feasible(name):
    prob = bundled_instances()[name]
    base, cons = base_and_constraints(prob)
    lam = _large_weight(base, cons)
    pp = PenalizedProblem(base, [c.with_weight(lam) for c in cons])
    _, optima = brute_force_optima(pp.penalized)
    mask = pp.feasible_mask()
    reg = prob.register
    strides = reg.strides
    for z in optima:
        assert mask[int(np.dot(z, strides))]
