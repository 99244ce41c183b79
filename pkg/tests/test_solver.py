"""Gradient-flow solver: filter, closed-form state, residual, Newton, stopping."""

import math

import numpy as np
import pytest

from conftest import random_matrix, random_problem
from dsmg import (
    AprioriRule,
    DegenerateResidual,
    DiscrepancyRule,
    DomainError,
    NoisyProblem,
    PreconditionViolated,
    UnattainableDiscrepancy,
    UnstableStep,
    apply,
    choose_t0,
    discrepancy,
    discrepancy_derivative,
    evolution_filter,
    factorize_svd,
    from_diagonal,
    landweber_integrate,
    minimal_norm_solution,
    newton_solve_t,
    solution_at,
    solve,
)
from dsmg.solver import FLAG_DISCREPANCY_AT_START


def scalar_problem(s=1.0, f=1.0, delta=0.01):
    return NoisyProblem(
        factorization=from_diagonal([s]), f_delta=np.array([f]), delta=delta
    )


def filter_series(lam: float, t: float, terms: int = 200) -> float:
    """Taylor oracle: (1 - exp(-t*lam)) / lam = t * sum_k (-t*lam)^k / (k+1)!."""
    x = t * lam
    total = 0.0
    term = 1.0
    for k in range(terms):
        total += term
        term *= -x / (k + 2)
    return t * total


class TestEvolutionFilter:
    def test_zero_eigenvalue_limit(self):
        assert evolution_filter(0.0, 7.0) == 7.0

    def test_zero_time(self):
        assert evolution_filter(2.0, 0.0) == 0.0

    def test_tiny_product_matches_series(self):
        lam, t = 1e-9, 1.0
        expected = filter_series(lam, t)
        assert abs(evolution_filter(lam, t) - expected) <= 1e-15

    def test_vectorized(self):
        lam = np.array([0.0, 1.0, 10.0])
        out = evolution_filter(lam, 2.0)
        assert out.shape == (3,)
        assert out[0] == 2.0
        assert abs(out[1] - (1 - math.exp(-2.0))) < 1e-15

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            evolution_filter(-1.0, 1.0)
        with pytest.raises(DomainError):
            evolution_filter(1.0, -1.0)


class TestSolutionAt:
    def test_zero_time_zero_start(self):
        problem = random_problem(0, m=4, n=4)
        assert np.array_equal(solution_at(problem, 0.0), np.zeros(4))

    def test_zero_time_returns_start(self):
        base = random_problem(1, m=4, n=4)
        rng = np.random.default_rng(5)
        start = rng.normal(size=4)
        problem = NoisyProblem(base.factorization, base.f_delta, base.delta, u0=start)
        assert np.array_equal(solution_at(problem, 0.0), start)

    def test_scalar_closed_form(self):
        problem = scalar_problem()
        for t in (0.1, 1.0, 4.0):
            assert abs(solution_at(problem, t)[0] - (1 - math.exp(-t))) < 1e-14

    def test_matches_euler_integration(self):
        problem = random_problem(2, m=6, n=6, sing_lo=0.5, sing_hi=1.0)
        lam_max = problem.spectrum_n.max()
        step = 1e-5 / lam_max
        t = 0.37
        n_steps = int(round(t / step))
        euler = landweber_integrate(problem, step, n_steps)
        closed = solution_at(problem, n_steps * step)
        assert np.linalg.norm(euler - closed) <= 1e-3 * np.linalg.norm(closed)

    def test_nonzero_start_decays_toward_data(self):
        base = random_problem(3, m=5, n=5, sing_lo=0.5, sing_hi=1.5)
        rng = np.random.default_rng(6)
        start = rng.normal(size=5)
        problem = NoisyProblem(base.factorization, base.f_delta, base.delta, u0=start)
        # at large t the start point is forgotten: both runs converge together
        other = NoisyProblem(base.factorization, base.f_delta, base.delta)
        t = 200.0
        gap = np.linalg.norm(solution_at(problem, t) - solution_at(other, t))
        assert gap <= 1e-8 * np.linalg.norm(solution_at(other, t))


class TestDiscrepancy:
    def test_at_zero_equals_data_norm(self):
        problem = random_problem(4, m=5, n=5)
        assert abs(discrepancy(problem, 0.0) - np.linalg.norm(problem.f_delta)) < 1e-12

    def test_scalar_decay(self):
        problem = scalar_problem()
        assert abs(discrepancy(problem, math.log(10.0)) - 0.1) < 1e-14

    def test_matches_recomputed_residual(self):
        problem = random_problem(5, m=5, n=3)
        for t in (0.0, 0.2, 1.0, 5.0):
            state = solution_at(problem, t)
            direct = np.linalg.norm(apply(problem.factorization, state) - problem.f_delta)
            assert abs(discrepancy(problem, t) - direct) <= 1e-10 * max(direct, 1e-30)

    def test_initial_residual_cache_consistent(self):
        base = random_problem(6, m=5, n=4)
        rng = np.random.default_rng(7)
        start = rng.normal(size=4)
        problem = NoisyProblem(base.factorization, base.f_delta, base.delta, u0=start)
        recomputed = problem.factorization.u_dense().conj().T @ (
            apply(problem.factorization, start) - problem.f_delta
        )
        assert np.linalg.norm(problem.initial_residual_coefficients - recomputed) <= 1e-12


class TestDiscrepancyDerivative:
    def test_scalar(self):
        problem = scalar_problem()
        for t in (0.0, 0.5, 2.0):
            assert abs(discrepancy_derivative(problem, t) + math.exp(-t)) < 1e-14

    def test_zero_when_data_in_null_space(self):
        # A = diag(1, 0), f along the dead direction: the flow never moves
        fact = from_diagonal([1.0, 0.0])
        problem = NoisyProblem(fact, np.array([0.0, 1.0]), delta=0.01)
        assert discrepancy_derivative(problem, 1.0) == 0.0
        assert discrepancy(problem, 0.0) == discrepancy(problem, 10.0) == 1.0
        with pytest.raises(UnattainableDiscrepancy):
            newton_solve_t(problem, 1.5, 1.0)

    def test_finite_difference_agreement(self):
        problem = random_problem(8, m=6, n=6, sing_lo=0.3, sing_hi=1.2)
        for t in (0.05, 0.7, 2.0):
            step = 1e-6 * max(1.0, t)
            fd = (discrepancy(problem, t + step) - discrepancy(problem, max(t - step, 0.0))) / (
                2 * step if t >= step else step
            )
            exact = discrepancy_derivative(problem, t)
            assert abs(fd - exact) <= 1e-4 * abs(exact)

    def test_degenerate_zero_residual(self):
        fact = from_diagonal([1.0])
        problem = NoisyProblem(fact, np.array([1.0]), delta=0.5, u0=np.array([1.0]))
        with pytest.raises(DegenerateResidual):
            discrepancy_derivative(problem, 0.0)


class TestNewton:
    def test_scalar_analytic_root(self):
        problem = scalar_problem(delta=0.01)
        start = choose_t0(problem, 1.5)
        result = newton_solve_t(problem, 1.5, start.t0)
        expected = math.log(1.0 / 0.015)
        assert abs(result.t_delta - expected) <= 1e-8 * expected
        assert result.iterations <= 30

    @pytest.mark.parametrize("C", [1.05, 1.3, 1.5, 1.9])
    def test_residual_hits_target(self, C):
        problem = scalar_problem(delta=0.01)
        start = choose_t0(problem, C)
        result = newton_solve_t(problem, C, start.t0)
        target = C * problem.delta
        assert abs(discrepancy(problem, result.t_delta) - target) <= 1e-8 * target

    def test_two_mode_root_matches_bisection_oracle(self):
        problem = NoisyProblem(
            factorization=from_diagonal([1.0, 0.1]),
            f_delta=np.array([1.0, 1.0]),
            delta=0.05,
        )
        C = 1.1
        target = C * problem.delta

        def gap(t):
            return math.sqrt(math.exp(-2.0 * t) + math.exp(-0.02 * t)) - target

        lo, hi = 0.0, 1.0
        while gap(hi) > 0:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if gap(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-10:
                break
        oracle_root = 0.5 * (lo + hi)
        start = choose_t0(problem, C)
        result = newton_solve_t(problem, C, start.t0)
        assert abs(result.t_delta - oracle_root) <= 1e-5

    def test_precondition_violated(self):
        problem = scalar_problem(delta=0.01)
        # psi(10) = e^-10 well below C*delta
        with pytest.raises(PreconditionViolated):
            newton_solve_t(problem, 1.5, 10.0)

    def test_iterates_nondecreasing(self):
        for seed in range(10):
            problem = random_problem(seed + 200, m=6, n=6, sing_lo=0.05, sing_hi=2.0)
            start = choose_t0(problem, 1.2)
            result = newton_solve_t(problem, 1.2, start.t0)
            trace = np.array(result.iterates)
            assert np.all(np.diff(trace) >= 0)


class TestChooseT0:
    def test_scalar_lands_in_band_or_above_target(self):
        problem = scalar_problem(delta=0.01)
        C = 1.5
        result = choose_t0(problem, C)
        resid = discrepancy(problem, result.t0)
        in_band = problem.delta < resid <= 2 * problem.delta
        assert in_band or resid > C * problem.delta
        assert resid > C * problem.delta  # Newton precondition always holds

    def test_immediate_acceptance_single_probe(self):
        # engineered so the very first probe lands in (delta, 2*delta] and
        # already exceeds C*delta: slow mode carrying 1.5*delta of data
        fact = from_diagonal([1.0, math.sqrt(1e-9)])
        problem = NoisyProblem(fact, np.array([1.0, 0.015]), delta=0.01)
        result = choose_t0(problem, 1.2)
        assert result.probes == 1
        assert not result.used_fallback

    def test_probe_outputs_positive_finite(self):
        for seed in range(10):
            problem = random_problem(seed + 300, m=5, n=5, sing_lo=0.01, sing_hi=3.0)
            result = choose_t0(problem, 1.1)
            assert math.isfinite(result.t0) and result.t0 > 0
            assert 1 <= result.probes <= 400

    def test_precondition_violated_when_no_root(self):
        problem = scalar_problem(f=0.001, delta=0.01)
        with pytest.raises(PreconditionViolated):
            choose_t0(problem, 1.5)

    def test_probe_budget_fallback_still_solves(self):
        # an astronomically small noise bound exhausts the factor-of-10 walk;
        # the flagged bisection fallback must still hand Newton a good start
        problem = scalar_problem(delta=1e-220)
        result = choose_t0(problem, 1.5)
        assert result.used_fallback
        target = 1.5 * problem.delta
        assert discrepancy(problem, result.t0) > target
        newton = newton_solve_t(problem, 1.5, result.t0)
        expected = math.log(1.0 / target)
        assert abs(newton.t_delta - expected) <= 1e-8 * expected
        assert newton.iterations <= 30


class TestSolve:
    def test_apriori_exact_data_errors_shrink(self):
        # spectrum reaching down to lam ~ 1e-2 keeps all three stopping times
        # short of full convergence, so the decrease is visible at each level
        matrix = random_matrix(44, 5, 5, 0.1, 1.5)
        fact = factorize_svd(matrix)
        rng = np.random.default_rng(9)
        y = rng.normal(size=5)
        f = matrix @ y
        errors = []
        for k in (2, 4, 6):
            problem = NoisyProblem(fact, f, delta=10.0 ** (-k))
            report = solve(problem, AprioriRule(C=1.0, gamma=0.5))
            errors.append(np.linalg.norm(report.solution - y))
        assert errors[0] > errors[1] > errors[2]

    def test_apriori_time_formula(self):
        problem = scalar_problem(delta=0.01)
        report = solve(problem, AprioriRule(C=1.0, gamma=0.5))
        assert abs(report.t_delta - 10.0) < 1e-12
        assert report.newton_iterations == 0

    def test_degenerate_start_flagged(self):
        problem = scalar_problem(f=0.001, delta=0.01)
        report = solve(problem, DiscrepancyRule(C=1.5))
        assert report.t_delta == 0.0
        assert np.array_equal(report.solution, np.zeros(1))
        assert FLAG_DISCREPANCY_AT_START in report.diagnostics

    def test_scalar_residual_equals_target(self):
        problem = scalar_problem(delta=0.01)
        report = solve(problem, DiscrepancyRule(C=1.5))
        target = 1.5 * 0.01
        assert abs(report.residual_norm - target) <= 1e-8 * target

    def test_complex_operator_calibrates(self):
        rng = np.random.default_rng(21)
        matrix = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        x = rng.normal(size=5) + 1j * rng.normal(size=5)
        exact = matrix @ x
        noise = rng.normal(size=5) + 1j * rng.normal(size=5)
        delta = 0.05 * np.linalg.norm(exact)
        noise *= delta / np.linalg.norm(noise)
        problem = NoisyProblem(factorize_svd(matrix), exact + noise, delta)
        report = solve(problem, DiscrepancyRule(C=1.2))
        target = 1.2 * delta
        assert abs(report.residual_norm - target) <= 1e-8 * target
        direct = np.linalg.norm(apply(problem.factorization, report.solution) - problem.f_delta)
        assert abs(direct - report.residual_norm) <= 1e-10 * direct

    def test_report_residual_recomputable(self):
        for seed in range(5):
            problem = random_problem(seed + 400, m=6, n=5, sing_lo=0.2, sing_hi=1.5)
            report = solve(problem, DiscrepancyRule(C=1.3))
            direct = np.linalg.norm(
                apply(problem.factorization, report.solution) - problem.f_delta
            )
            assert abs(report.residual_norm - direct) <= 1e-10 * direct

    def test_exact_data_flow_approaches_minimal_norm_solution(self):
        matrix = random_matrix(55, 5, 5, 0.4, 1.6)
        fact = factorize_svd(matrix)
        rng = np.random.default_rng(10)
        y = rng.normal(size=5)
        problem = NoisyProblem(fact, matrix @ y, delta=1e-12)
        pinv = minimal_norm_solution(fact, problem.f_delta)
        state = solution_at(problem, 500.0)
        assert np.linalg.norm(state - pinv) <= 1e-8 * np.linalg.norm(pinv)

    def test_rule_validation(self):
        with pytest.raises(DomainError):
            DiscrepancyRule(C=2.5)
        with pytest.raises(DomainError):
            DiscrepancyRule(C=1.0)
        with pytest.raises(DomainError):
            AprioriRule(C=-1.0)
        with pytest.raises(DomainError):
            AprioriRule(C=1.0, gamma=1.0)


class TestLandweber:
    def test_zero_steps_returns_start(self):
        problem = random_problem(11, m=4, n=4)
        assert np.array_equal(landweber_integrate(problem, 1e-3, 0), np.zeros(4))

    def test_scalar_exponential(self):
        problem = scalar_problem()
        out = landweber_integrate(problem, 1e-4, 10_000)
        assert abs(out[0] - (1 - math.exp(-1.0))) <= 1e-3

    def test_matches_closed_form(self):
        problem = random_problem(12, m=6, n=6, sing_lo=0.5, sing_hi=1.0)
        lam_max = problem.spectrum_n.max()
        step = 2e-4 / lam_max
        n_steps = int(round(0.5 / step))
        euler = landweber_integrate(problem, step, n_steps)
        closed = solution_at(problem, n_steps * step)
        assert np.linalg.norm(euler - closed) <= 5e-3 * np.linalg.norm(closed)

    def test_unstable_step_rejected(self):
        problem = scalar_problem()  # lam_max = 1
        with pytest.raises(UnstableStep):
            landweber_integrate(problem, 2.0, 10)

    def test_diagonal_fast_path_matches_dense(self):
        # identity-basis problems use the elementwise loop; cross-check via
        # an equivalent dense factorization of the same diagonal matrix
        diag = np.array([1.0, 0.5, 0.25])
        f = np.array([1.0, -2.0, 0.5])
        spec = NoisyProblem(from_diagonal(diag), f, delta=0.1)
        dense = NoisyProblem(factorize_svd(np.diag(diag)), f, delta=0.1)
        a = landweber_integrate(spec, 1e-2, 500)
        b = landweber_integrate(dense, 1e-2, 500)
        assert np.linalg.norm(a - b) <= 1e-10
