"""Shared builders for randomized test problems."""

import numpy as np

from dsmg import NoisyProblem, factorize_svd


def random_orthogonal(rng, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def random_matrix(seed: int, m: int, n: int, sing_lo: float, sing_hi: float) -> np.ndarray:
    """Dense matrix with log-uniform singular values in [sing_lo, sing_hi]."""
    rng = np.random.default_rng(seed)
    k = min(m, n)
    left = random_orthogonal(rng, m)
    right = random_orthogonal(rng, n)
    sing = np.sort(np.exp(rng.uniform(np.log(sing_lo), np.log(sing_hi), k)))[::-1]
    s_block = np.zeros((m, n))
    s_block[np.arange(k), np.arange(k)] = sing
    return left @ s_block @ right.T


def random_problem(
    seed: int,
    m: int = 6,
    n: int = 6,
    sing_lo: float = 0.3,
    sing_hi: float = 1.5,
    delta_rel: float = 0.1,
) -> NoisyProblem:
    """Solvable noisy problem: f_delta = A x + e with ||e|| = delta exactly."""
    rng = np.random.default_rng(seed + 7919)
    matrix = random_matrix(seed, m, n, sing_lo, sing_hi)
    x = rng.normal(size=n)
    exact = matrix @ x
    noise = rng.normal(size=m)
    delta = delta_rel * np.linalg.norm(exact)
    noise *= delta / np.linalg.norm(noise)
    return NoisyProblem(
        factorization=factorize_svd(matrix), f_delta=exact + noise, delta=delta
    )
