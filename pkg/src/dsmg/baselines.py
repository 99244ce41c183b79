"""Variational (Tikhonov) regularization baseline with discrepancy-chosen alpha.

Implemented spectrally on the same factorization as the gradient-flow solver,
so parameter-search effort is directly comparable: the filter is
conj(s_i) / (|s_i|^2 + alpha) and the residual norm

    psi_vr(alpha) = || diag(alpha / (|s_i|^2 + alpha)) U* f_delta ||

is strictly increasing in alpha, so alpha is found by bisection on log(alpha).
"""

from dataclasses import dataclass

import numpy as np

from .errors import BracketFailure, DomainError, IterationBudgetExceeded, UnattainableDiscrepancy
from .linalg import _left_multiply
from .solver import NoisyProblem

VR_TOL_REL = 1e-8
VR_MAX_BISECTIONS = 500
BRACKET_LO_FACTOR = 1e-16
BRACKET_HI_FACTOR = 1e4


@dataclass(frozen=True)
class VRReport:
    """Outcome of one Tikhonov solve."""

    alpha: float
    solution: np.ndarray
    residual_norm: float
    bisection_iterations: int


def _vr_residual(problem: NoisyProblem, alpha: float) -> float:
    gains = alpha / (problem.spectrum_m + alpha)
    return float(np.linalg.norm(gains * problem.rhs_coefficients))


def tikhonov_solution(problem: NoisyProblem, alpha: float) -> np.ndarray:
    """u_alpha = V diag(conj(s_i) / (|s_i|^2 + alpha)) U* f_delta."""
    if not (np.isfinite(alpha) and alpha > 0):
        raise DomainError(f"alpha={alpha} must be positive and finite")
    fact = problem.factorization
    k = len(fact.diag)
    gains = fact.diag.conj() / (fact.eigenvalues + alpha)
    driven = gains * problem.rhs_coefficients[:k]
    coeffs = np.zeros(fact.shape[1], dtype=driven.dtype)
    coeffs[:k] = driven
    return _left_multiply(fact.v_basis, coeffs)


def vr_solve(problem: NoisyProblem, C: float) -> VRReport:
    """Pick alpha so the Tikhonov residual equals C * delta, then solve.

    The start point u0 of the problem is ignored; Tikhonov regularizes from
    zero. Raises UnattainableDiscrepancy when even alpha -> 0 cannot push
    the residual below the target, and BracketFailure when the fixed
    log-alpha bracket does not straddle it.
    """
    if not (np.isfinite(C) and C > 0):
        raise DomainError(f"C={C} must be positive and finite")
    target = C * problem.delta
    tol = VR_TOL_REL * target
    floor = float(np.linalg.norm(problem.rhs_coefficients[problem.spectrum_m == 0.0]))
    if floor >= target:
        raise UnattainableDiscrepancy(
            f"residual floor {floor:.6e} >= C*delta = {target:.6e}"
        )
    lam_max = float(problem.spectrum_m.max(initial=0.0))
    if lam_max == 0.0:
        raise UnattainableDiscrepancy("operator is identically zero")
    lo = BRACKET_LO_FACTOR * lam_max
    hi = BRACKET_HI_FACTOR * lam_max
    resid_lo = _vr_residual(problem, lo)
    resid_hi = _vr_residual(problem, hi)
    iterations = 2
    alpha = None
    if abs(resid_lo - target) <= tol:
        alpha = lo
    elif abs(resid_hi - target) <= tol:
        alpha = hi
    elif not resid_lo < target < resid_hi:
        raise BracketFailure(
            f"bracket [{lo:.3e}, {hi:.3e}] gives residuals "
            f"[{resid_lo:.6e}, {resid_hi:.6e}] around target {target:.6e}"
        )
    if alpha is None:
        for _ in range(VR_MAX_BISECTIONS):
            mid = float(np.sqrt(lo * hi))
            resid_mid = _vr_residual(problem, mid)
            iterations += 1
            if abs(resid_mid - target) <= tol:
                alpha = mid
                break
            if resid_mid > target:
                hi = mid
            else:
                lo = mid
        else:
            raise IterationBudgetExceeded(
                f"bisection did not reach |psi_vr - C*delta| <= {tol:.3e} "
                f"in {VR_MAX_BISECTIONS} iterations"
            )
    state = tikhonov_solution(problem, alpha)
    return VRReport(
        alpha=alpha,
        solution=state,
        residual_norm=_vr_residual(problem, alpha),
        bisection_iterations=iterations,
    )
