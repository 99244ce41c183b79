"""Gradient-flow regularization with closed-form spectral evaluation.

The flow du/dt = -A*(A u - f_delta) is never integrated numerically for the
solution path: given A = U S V*, the state at time t and the residual norm

    psi(t) = ||A u(t) - f_delta||

have closed spectral forms, so picking the stopping time reduces to scalar
root finding. ``solve`` supports two stopping rules: the discrepancy
principle psi(t) = C * delta solved by Newton's method (psi is strictly
decreasing and strictly convex whenever the data have a component outside
the null space of A*), and the a priori time t = C / delta**gamma.
``landweber_integrate`` is the explicit-Euler integrator of the same flow,
kept as a slow independent cross-check.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateResidual,
    DimensionMismatch,
    DomainError,
    IterationBudgetExceeded,
    PreconditionViolated,
    UnattainableDiscrepancy,
    UnstableStep,
)
from .linalg import (
    SpectralFactorization,
    _adjoint_multiply,
    _frozen_array,
    _left_multiply,
    adjoint_apply,
)

NEWTON_TOL_REL = 1e-8
NEWTON_MAX_ITER = 100
T0_MAX_PROBES = 200
T_CLAMP = 1e300

FLAG_DISCREPANCY_AT_START = "discrepancy_already_satisfied_at_t0"
FLAG_PROBE_FALLBACK = "t0_probe_budget_exceeded_bisection_fallback"


@dataclass(frozen=True)
class DiscrepancyRule:
    """Stop when the residual norm equals C * delta, with 1 < C < 2."""

    C: float = 1.1

    def __post_init__(self):
        if not 1.0 < self.C < 2.0:
            raise DomainError(f"discrepancy constant C={self.C} must lie in (1, 2)")


@dataclass(frozen=True)
class AprioriRule:
    """Stop at the data-independent time t = C / delta**gamma."""

    C: float = 1.0
    gamma: float = 0.5

    def __post_init__(self):
        if self.C <= 0:
            raise DomainError(f"a priori constant C={self.C} must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"a priori exponent gamma={self.gamma} must lie in (0, 1)")


StoppingRule = DiscrepancyRule | AprioriRule


@dataclass(frozen=True)
class NoisyProblem:
    """A factorized operator, noisy right-hand side, noise bound and start point.

    ``delta`` bounds the data error ||f_delta - f|| in the same norm as
    ``f_delta``. ``u0`` defaults to the zero vector.
    """

    factorization: SpectralFactorization
    f_delta: np.ndarray
    delta: float
    u0: np.ndarray | None = None

    def __post_init__(self):
        m, n = self.factorization.shape
        f = _frozen_array(self.f_delta)
        object.__setattr__(self, "f_delta", f)
        if f.shape != (m,):
            raise DimensionMismatch(f"f_delta has shape {f.shape}, expected ({m},)")
        if not np.all(np.isfinite(f)):
            raise DomainError("f_delta contains non-finite entries")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise DomainError(f"delta={self.delta} must be positive and finite")
        start = np.zeros(n) if self.u0 is None else self.u0
        start = _frozen_array(start)
        object.__setattr__(self, "u0", start)
        if start.shape != (n,):
            raise DimensionMismatch(f"u0 has shape {start.shape}, expected ({n},)")
        if not np.all(np.isfinite(start)):
            raise DomainError("u0 contains non-finite entries")

    @cached_property
    def spectrum_m(self) -> np.ndarray:
        """Eigenvalues of A A*: |s_i|^2 padded with zeros to length m."""
        m, _ = self.factorization.shape
        eig = self.factorization.eigenvalues
        out = np.zeros(m)
        out[: len(eig)] = eig
        out.setflags(write=False)
        return out

    @cached_property
    def spectrum_n(self) -> np.ndarray:
        """Eigenvalues of A* A: |s_i|^2 padded with zeros to length n."""
        _, n = self.factorization.shape
        eig = self.factorization.eigenvalues
        out = np.zeros(n)
        out[: len(eig)] = eig
        out.setflags(write=False)
        return out

    @cached_property
    def rhs_coefficients(self) -> np.ndarray:
        """U* f_delta."""
        out = _adjoint_multiply(self.factorization.u_basis, self.f_delta)
        out = np.array(out)
        out.setflags(write=False)
        return out

    @cached_property
    def initial_residual_coefficients(self) -> np.ndarray:
        """U* (A u0 - f_delta), the residual of the start point in the U basis."""
        fact = self.factorization
        k = len(fact.diag)
        if np.count_nonzero(self.u0) == 0:
            out = -self.rhs_coefficients
        else:
            start_coeffs = _adjoint_multiply(fact.v_basis, self.u0)
            m = fact.shape[0]
            mapped = np.zeros(m, dtype=np.result_type(fact.diag.dtype, start_coeffs.dtype))
            mapped[:k] = fact.diag * start_coeffs[:k]
            out = mapped - self.rhs_coefficients
        out = np.array(out)
        out.setflags(write=False)
        return out

    @cached_property
    def residual_floor(self) -> float:
        """inf_t psi(t): the residual mass on modes with zero eigenvalue."""
        stuck = self.spectrum_m == 0.0
        return _scaled_norm(self.initial_residual_coefficients[stuck])


class NewtonResult(NamedTuple):
    t_delta: float
    iterations: int
    iterates: tuple


class T0Result(NamedTuple):
    t0: float
    probes: int
    used_fallback: bool


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one regularized solve."""

    t_delta: float
    solution: np.ndarray
    residual_norm: float
    newton_iterations: int
    t0_probes: int
    rule_used: StoppingRule
    diagnostics: tuple = field(default=())


def evolution_filter(lam, t: float):
    """Spectral gain (1 - exp(-t*lam)) / lam of the flow, with value t at lam = 0.

    Accepts a scalar or an array of eigenvalues. Evaluated through expm1 so
    tiny t*lam does not cancel; the result always lies in [0, t].
    """
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0):
        raise DomainError("eigenvalues must be nonnegative")
    if not (np.isfinite(t) and t >= 0):
        raise DomainError(f"t={t} must be nonnegative and finite")
    positive = lam_arr > 0
    safe = np.where(positive, lam_arr, 1.0)
    gains = np.where(positive, -np.expm1(-t * safe) / safe, t)
    # subnormal t*lam can round the quotient above the exact bound t
    gains = np.minimum(gains, t)
    if np.isscalar(lam) or lam_arr.ndim == 0:
        return float(gains)
    return gains


def solution_at(problem: NoisyProblem, t: float) -> np.ndarray:
    """Evaluate the flow state u(t) in closed form.

    u(t) = V [ exp(-t L) V* u0 + diag(filter(lam_i, t)) conj(S) U* f_delta ]
    where L = diag(|s_i|^2). At t = 0 this is exactly u0.
    """
    if not (np.isfinite(t) and t >= 0):
        raise DomainError(f"t={t} must be nonnegative and finite")
    if t == 0.0:
        return np.array(problem.u0)
    fact = problem.factorization
    k = len(fact.diag)
    gains = evolution_filter(fact.eigenvalues, t)
    driven = gains * fact.diag.conj() * problem.rhs_coefficients[:k]
    if np.count_nonzero(problem.u0) == 0:
        coeffs = np.zeros(fact.shape[1], dtype=driven.dtype)
        coeffs[:k] = driven
    else:
        start_coeffs = _adjoint_multiply(fact.v_basis, problem.u0)
        coeffs = np.exp(-t * problem.spectrum_n) * start_coeffs
        coeffs = coeffs.astype(np.result_type(coeffs.dtype, driven.dtype))
        coeffs[:k] += driven
    return _left_multiply(fact.v_basis, coeffs)


def _scaled_norm(values: np.ndarray) -> float:
    """Euclidean norm with rescaling: accurate even when the squares underflow."""
    scale = float(np.max(np.abs(values), initial=0.0))
    if scale == 0.0:
        return 0.0
    return scale * float(np.linalg.norm(values / scale))


def discrepancy(problem: NoisyProblem, t: float) -> float:
    """Residual norm psi(t) = ||A u(t) - f_delta|| evaluated spectrally.

    Modes with zero eigenvalue keep their initial residual forever, so
    psi decreases monotonically from ||A u0 - f_delta|| to the residual
    floor as t grows.
    """
    if not (np.isfinite(t) and t >= 0):
        raise DomainError(f"t={t} must be nonnegative and finite")
    damped = np.exp(-t * problem.spectrum_m) * problem.initial_residual_coefficients
    return _scaled_norm(damped)


def discrepancy_derivative(problem: NoisyProblem, t: float) -> float:
    """d psi / dt, strictly negative while any decaying mode carries residual."""
    if not (np.isfinite(t) and t >= 0):
        raise DomainError(f"t={t} must be nonnegative and finite")
    damped = np.exp(-t * problem.spectrum_m) * problem.initial_residual_coefficients
    scale = float(np.max(np.abs(damped), initial=0.0))
    if scale == 0.0:
        raise DegenerateResidual("residual norm is zero; derivative undefined")
    scaled = damped / scale
    weighted = float(np.sum(problem.spectrum_m * np.abs(scaled) ** 2))
    return -scale * weighted / float(np.linalg.norm(scaled))


def _check_attainable(problem: NoisyProblem, target: float) -> None:
    if problem.residual_floor >= target:
        raise UnattainableDiscrepancy(
            f"residual floor {problem.residual_floor:.6e} >= C*delta = {target:.6e}; "
            "C is too small or delta understates the noise"
        )


def newton_solve_t(problem: NoisyProblem, C: float, t0: float) -> NewtonResult:
    """Solve psi(t) = C * delta by Newton's method started at t0.

    Requires psi(t0) > C * delta. Because psi is decreasing and strictly
    convex, the iterates increase monotonically toward the root; each step
    is clipped if floating-point noise would push the residual materially
    below the target, with a bisection step after two consecutive clips.
    Returns the root, the iteration count, and the iterate trace.
    """
    target = C * problem.delta
    tol = NEWTON_TOL_REL * target
    _check_attainable(problem, target)
    t = float(t0)
    gap = discrepancy(problem, t) - target
    if gap <= 0:
        raise PreconditionViolated(
            f"psi(t0)={gap + target:.6e} must exceed C*delta={target:.6e}"
        )
    iterates = [t]
    lower = t
    upper = None
    consecutive_clips = 0
    for iteration in range(1, NEWTON_MAX_ITER + 1):
        if abs(gap) <= tol:
            return NewtonResult(t, iteration - 1, tuple(iterates))
        slope = discrepancy_derivative(problem, t)
        if slope >= 0.0 or not math.isfinite(slope):
            raise IterationBudgetExceeded(
                f"residual slope degenerated to {slope} at t={t:.6e}"
            )
        t_next = t - gap / slope
        if not math.isfinite(t_next):
            t_next = t * 10.0
        gap_next = discrepancy(problem, t_next) - target
        if gap_next < -tol:
            upper = t_next
            consecutive_clips += 1
            if consecutive_clips >= 2:
                t_next = 0.5 * (lower + upper)
            else:
                for _ in range(80):
                    t_next = 0.5 * (t + t_next)
                    gap_next = discrepancy(problem, t_next) - target
                    if gap_next >= -tol:
                        break
            gap_next = discrepancy(problem, t_next) - target
        else:
            consecutive_clips = 0
        t, gap = t_next, gap_next
        if gap > 0:
            lower = t
        iterates.append(t)
    if abs(gap) <= tol:
        return NewtonResult(t, NEWTON_MAX_ITER, tuple(iterates))
    raise IterationBudgetExceeded(
        f"Newton did not reach |psi - C*delta| <= {tol:.3e} in {NEWTON_MAX_ITER} iterations"
    )


def choose_t0(problem: NoisyProblem, C: float) -> T0Result:
    """Probe for a Newton starting time with psi(t0) > C * delta.

    Starts at 10 * psi(0) / delta and walks by factors of 10 and 3: shrink
    while the residual has already fallen below delta (by 10 before any
    above-band probe was seen, by 3 after), grow by 3 while it still exceeds
    2 * delta and no undershoot was seen, stop as soon as the probe lands in
    the band (delta, 2*delta] or brackets it from both sides. The accepted
    point is then shrunk by 3 until psi(t0) strictly exceeds C * delta.
    If the probe budget runs out, a bisection on [0, t] recovers a valid
    starting point and the result is flagged.
    """
    delta = problem.delta
    target = C * delta
    resid_start = discrepancy(problem, 0.0)
    if resid_start <= target:
        raise PreconditionViolated(
            f"psi(0)={resid_start:.6e} <= C*delta={target:.6e}; no positive root exists"
        )
    t = min(10.0 * resid_start / delta, T_CLAMP)
    probes = 0
    seen_undershoot = False
    seen_overshoot = False
    accepted = None
    accepted_resid = None
    while probes < T0_MAX_PROBES:
        probes += 1
        resid = discrepancy(problem, t)
        band_gap = resid - delta
        if 0.0 < band_gap <= delta:
            accepted, accepted_resid = t, resid
            break
        if band_gap <= 0.0:
            seen_undershoot = True
            t /= 3.0 if seen_overshoot else 10.0
        else:
            if seen_undershoot:
                accepted, accepted_resid = t, resid
                break
            seen_overshoot = True
            t = min(t * 3.0, T_CLAMP)
    used_fallback = accepted is None
    if used_fallback:
        accepted, accepted_resid, extra = _bisect_t0(problem, delta, target, t)
        probes += extra
    for _ in range(1000):
        if accepted_resid > target:
            return T0Result(accepted, probes, used_fallback)
        accepted /= 3.0
        probes += 1
        accepted_resid = discrepancy(problem, accepted)
    raise IterationBudgetExceeded(
        "could not back off to a starting time with psi(t0) > C*delta"
    )


def _bisect_t0(problem: NoisyProblem, delta: float, target: float, hi: float):
    """Bisection on [0, hi] driving the left end into (target, 2*delta].

    Keeps psi(lo) > target throughout, so the returned point always satisfies
    the Newton precondition; the generous iteration cap lets the bracket
    collapse from any double-precision scale down to the band width, leaving
    Newton a start close to the root even when the probe walk ran out of
    budget.
    """
    lo = 0.0
    resid_lo = discrepancy(problem, lo)
    evals = 1
    for _ in range(1200):
        if resid_lo <= 2.0 * delta:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        resid_mid = discrepancy(problem, mid)
        evals += 1
        if resid_mid > target:
            lo, resid_lo = mid, resid_mid
        else:
            hi = mid
    return lo, resid_lo, evals


def solve(problem: NoisyProblem, rule: StoppingRule) -> SolveReport:
    """Run the flow to the stopping time chosen by ``rule``.

    Discrepancy branch: if the start point already satisfies
    ||A u0 - f_delta|| <= C * delta the report returns u0 at t = 0 with a
    diagnostic flag; otherwise the stopping time solves psi(t) = C * delta.
    A priori branch: t = C / delta**gamma with no residual evaluations.
    """
    if isinstance(rule, AprioriRule):
        t_stop = rule.C / problem.delta ** rule.gamma
        state = solution_at(problem, t_stop)
        return SolveReport(
            t_delta=t_stop,
            solution=state,
            residual_norm=discrepancy(problem, t_stop),
            newton_iterations=0,
            t0_probes=0,
            rule_used=rule,
        )
    if not isinstance(rule, DiscrepancyRule):
        raise DomainError(f"unknown stopping rule {rule!r}")
    target = rule.C * problem.delta
    resid_start = discrepancy(problem, 0.0)
    if resid_start <= target:
        return SolveReport(
            t_delta=0.0,
            solution=np.array(problem.u0),
            residual_norm=resid_start,
            newton_iterations=0,
            t0_probes=0,
            rule_used=rule,
            diagnostics=(FLAG_DISCREPANCY_AT_START,),
        )
    _check_attainable(problem, target)
    start = choose_t0(problem, rule.C)
    newton = newton_solve_t(problem, rule.C, start.t0)
    state = solution_at(problem, newton.t_delta)
    flags = (FLAG_PROBE_FALLBACK,) if start.used_fallback else ()
    return SolveReport(
        t_delta=newton.t_delta,
        solution=state,
        residual_norm=discrepancy(problem, newton.t_delta),
        newton_iterations=newton.iterations,
        t0_probes=start.probes,
        rule_used=rule,
        diagnostics=flags,
    )


def landweber_integrate(problem: NoisyProblem, step: float, n_steps: int) -> np.ndarray:
    """Explicit Euler on du/dt = -A*(A u - f_delta): the Landweber iteration.

    Stable only for step < 2 / max(|s_i|^2). Slow by design; serves as an
    integration oracle for ``solution_at``.
    """
    if n_steps < 0:
        raise DomainError("n_steps must be nonnegative")
    if not (np.isfinite(step) and step > 0):
        raise DomainError(f"step={step} must be positive and finite")
    lam_max = float(problem.spectrum_n.max(initial=0.0))
    if lam_max > 0 and step >= 2.0 / lam_max:
        raise UnstableStep(f"step {step} >= stability limit {2.0 / lam_max}")
    fact = problem.factorization
    drift = step * adjoint_apply(fact, problem.f_delta)
    state = np.array(problem.u0, dtype=np.result_type(problem.u0.dtype, drift.dtype))
    if n_steps == 0:
        return state
    if fact.v_basis is None:
        decay = 1.0 - step * problem.spectrum_n
        for _ in range(n_steps):
            state = decay * state + drift
        return state
    n = fact.shape[1]
    gram = (fact.v_basis * problem.spectrum_n) @ fact.v_basis.conj().T
    propagator = np.eye(n, dtype=gram.dtype) - step * gram
    state = state.astype(np.result_type(state.dtype, propagator.dtype))
    buffer = np.empty_like(state)
    for _ in range(n_steps):
        np.dot(propagator, state, out=buffer)
        buffer += drift
        state, buffer = buffer, state
    return state
