from __future__ import annotations

import math

import numpy as np
import pytest

from quditqaoa.optimize import (
    BudgetExhausted,
    ConsistencyError,
    EsConfig,
    Objective,
    QnConfig,
    best_of,
    default_population,
    es_minimize,
    es_optimizer,
    fd_gradient,
    multi_start,
    optimality_gap,
    qn_minimize,
    qn_optimizer,
    reduce_angles,
    run_seed,
    single_run,
)

# Calibration (seeds 0..49, starts uniform in [-5.12, 5.12]^2, 300 generations):
# population 6 / sigma 0.3 -> 2%, 20 / 2.0 -> 66%, 40 / 3.0 -> 80%,
# 60 / 3.0 -> 94%, 80 / 4.0 -> 96%. The test uses 60 / 3.0.
RASTRIGIN_POPULATION = 60
RASTRIGIN_STEP = 3.0


def sphere(center):
    center = np.asarray(center, dtype=float)
    return lambda x: float(np.sum((x - center) ** 2))


def rastrigin(x):
    return 10 * x.size + float(np.sum(x * x - 10 * np.cos(2 * np.pi * x)))


def rosen(x):
    return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)


class TestEs:
    def test_sphere(self):
        obj = Objective(sphere([0.7, -1.3]))
        rec = es_minimize(obj, EsConfig(max_generations=100, seed=3), [0.0, 0.0])
        assert rec.best_value < 1e-10
        assert len(rec.trace) <= 100

    def test_rastrigin_success_rate(self):
        hits = 0
        for s in range(50):
            x0 = np.random.default_rng(1000 + s).uniform(-5.12, 5.12, 2)
            cfg = EsConfig(population=RASTRIGIN_POPULATION, initial_step=RASTRIGIN_STEP,
                           max_generations=300, seed=s)
            hits += es_minimize(Objective(rastrigin), cfg, x0).best_value < 1e-6
        assert hits >= 40

    @pytest.mark.parametrize("dim,expected", [(2, 6), (16, 12)])
    def test_default_population(self, dim, expected):
        assert default_population(dim) == expected

    def test_population_used(self):
        obj = Objective(sphere([0, 0]))
        rec = es_minimize(obj, EsConfig(max_generations=3, seed=0), [1.0, 1.0])
        assert rec.evaluations_used == 3 * 6
        assert rec.flags == ["max_generations"]

    def test_trace_is_best_ever(self):
        rec = es_minimize(Objective(rosen), EsConfig(max_generations=60, seed=1), [-1.0, 1.0])
        assert np.all(np.diff(rec.trace) <= 0)
        assert rec.trace[-1] == rec.best_value
        assert rosen(rec.best_params) == rec.best_value

    def test_shift_invariance(self):
        f = sphere([0.2, 0.4])
        a = es_minimize(Objective(f), EsConfig(max_generations=40, seed=9), [1.0, 2.0])
        b = es_minimize(Objective(lambda x: f(x) + 123.0), EsConfig(max_generations=40, seed=9), [1.0, 2.0])
        np.testing.assert_array_equal(a.best_params, b.best_params)
        assert a.evaluations_used == b.evaluations_used

    def test_deterministic(self):
        runs = [es_minimize(Objective(rosen), EsConfig(max_generations=30, seed=5), [0.0, 0.0]) for _ in range(2)]
        assert runs[0].best_value == runs[1].best_value
        assert runs[0].trace == runs[1].trace

    def test_stagnation_stop(self):
        rec = es_minimize(Objective(lambda x: 1.0), EsConfig(max_generations=500, seed=0), [0.0, 0.0])
        assert rec.flags == ["stagnation"]
        assert len(rec.trace) == 50

    def test_budget_flag(self):
        obj = Objective(sphere([3, 3]), evaluation_budget=20)
        rec = es_minimize(obj, EsConfig(seed=0), [0.0, 0.0])
        assert rec.flags == ["budget_exhausted"]
        assert rec.evaluations_used == 20
        assert math.isfinite(rec.best_value)

    def test_budget_smaller_than_population(self):
        with pytest.raises(ValueError):
            es_minimize(Objective(rosen, evaluation_budget=5), EsConfig(), [0.0, 0.0])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EsConfig(population=3)
        with pytest.raises(ValueError):
            EsConfig(initial_step=0)


class TestQn:
    def test_quadratic(self):
        rec = qn_minimize(Objective(lambda x: float(x @ x)), QnConfig(max_iterations=5), [1.0, 1.0])
        assert rec.best_value < 1e-12
        assert len(rec.trace) <= 6

    def test_shifted_quadratic(self):
        rec = qn_minimize(Objective(sphere([0.3, -2.0])), None, [1.0, 1.0])
        assert rec.best_value < 1e-10

    def test_gradient_matches_analytic(self):
        def f(x):
            return float(np.sin(x[0]) * np.exp(0.5 * x[1]) + x[0] ** 3 / 3)

        def grad(x):
            return np.array([np.cos(x[0]) * np.exp(0.5 * x[1]) + x[0] ** 2,
                             0.5 * np.sin(x[0]) * np.exp(0.5 * x[1])])

        for x in np.random.default_rng(0).uniform(-2, 2, (20, 2)):
            g, ref = fd_gradient(f, x), grad(x)
            assert np.linalg.norm(g - ref) <= 1e-6 * max(np.linalg.norm(ref), 1.0)

    def test_stays_in_local_basin(self):
        # double well with minima near +-1; starting on the right stays right
        f = lambda x: float((x[0] ** 2 - 1) ** 2 + 0.3 * x[0] + x[1] ** 2)  # noqa: E731
        rec = qn_minimize(Objective(f), None, [0.8, 0.1])
        assert rec.best_params[0] > 0
        assert f(rec.best_params) > f(np.array([-1.04, 0.0]))

    def test_budget(self):
        rec = qn_minimize(Objective(rosen, evaluation_budget=30), None, [-1.0, 1.0])
        assert rec.flags == ["budget_exhausted"]
        assert rec.evaluations_used == 30

    def test_iteration_cap(self):
        rec = qn_minimize(Objective(rosen), QnConfig(max_iterations=2), [-1.2, 1.0])
        assert rec.flags == ["max_iterations"]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            QnConfig(fd_step=0)


class TestObjective:
    def test_counting_and_best(self):
        obj = Objective(lambda x: float(x[0]), evaluation_budget=3)
        obj([2.0])
        obj([-1.0])
        obj([5.0])
        assert obj.evaluation_count == 3
        assert obj.best_value == -1.0
        np.testing.assert_array_equal(obj.best_params, [-1.0])
        with pytest.raises(BudgetExhausted):
            obj([0.0])

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            Objective(rosen, evaluation_budget=0)


class TestMultiStart:
    def test_seed_derivation(self):
        a = run_seed(7, 3).generate_state(2)
        b = run_seed(7, 3).generate_state(2)
        c = run_seed(7, 4).generate_state(2)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_single_run_reproduces_fan_out(self):
        fac = lambda: Objective(sphere([0.5, 0.5, 1.0, 1.0]))  # noqa: E731
        opt = es_optimizer(EsConfig(max_generations=20))
        runs = multi_start(fac, opt, 4, seed=11, p=2)
        again = single_run(fac, opt, 2, 2, seed=11)
        assert again.best_value == runs[2].best_value
        assert again.seed == runs[2].seed
        np.testing.assert_array_equal(again.initial_point, runs[2].initial_point)

    def test_one_run(self):
        fac = lambda: Objective(sphere([1.0, 1.0]))  # noqa: E731
        runs = multi_start(fac, qn_optimizer(), 1, seed=0, p=1)
        assert len(runs) == 1
        assert best_of(runs) is runs[0]

    def test_initial_points_in_ranges(self):
        fac = lambda: Objective(lambda x: 0.0, evaluation_budget=50)  # noqa: E731
        runs = multi_start(fac, es_optimizer(EsConfig(max_generations=1)), 20, seed=1, p=3)
        for r in runs:
            assert np.all((0 <= r.initial_point[:3]) & (r.initial_point[:3] < 2 * math.pi))
            assert np.all((0 <= r.initial_point[3:]) & (r.initial_point[3:] < math.pi))

    def test_rejects_zero_runs(self):
        with pytest.raises(ValueError):
            multi_start(lambda: Objective(rosen), qn_optimizer(), 0, p=1)

    def test_record_dict(self):
        rec = qn_minimize(Objective(lambda x: float(x @ x)), None, [1.0, 1.0])
        d = rec.to_dict()
        assert d["method"] == "qn"
        assert d["evaluations_used"] == rec.evaluations_used
        assert len(d["best_params"]) == 2


class TestGap:
    def test_values(self):
        assert optimality_gap(3.0, 3.0) == 0
        assert optimality_gap(3.5, 3.0) == 0.5
        assert optimality_gap(3.0 - 1e-12, 3.0) == pytest.approx(0, abs=1e-11)

    def test_below_minimum(self):
        with pytest.raises(ConsistencyError):
            optimality_gap(2.0, 3.0)

    def test_reduce_angles(self):
        x = reduce_angles([7.0, -1.0, 10.0, 0.5])
        assert np.all((x >= 0) & (x < 2 * math.pi))
        np.testing.assert_allclose(x, np.mod([7.0, -1.0, 10.0, 0.5], 2 * math.pi))
