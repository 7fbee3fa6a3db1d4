"""Shared test utilities: random instances and independent oracles.

The oracles here deliberately avoid the implementation paths they check:
the proximal-map oracle runs coarse-to-fine scalar grid searches (with an
outer dual bisection for the coupled Frobenius-ball case), and the least
squares oracle assembles explicit normal equations over an orthonormal
basis of the symmetric matrix space.
"""

from __future__ import annotations

import numpy as np

from lowrank_oracle import (
    Dataset,
    FrobeniusBall,
    OperatorNormBall,
    Unconstrained,
    orthonormal_basis_design,
)

GRID_STAGES = (1e-2, 1e-4, 1e-6)


def random_symmetric(rng: np.random.Generator, m: int, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((m, m)) * scale
    return 0.5 * (a + a.T)


def random_low_rank(
    rng: np.random.Generator, m: int, rank: int, spectrum=None
) -> np.ndarray:
    if spectrum is None:
        spectrum = rng.uniform(0.5, 2.0, size=rank) * rng.choice([-1.0, 1.0], size=rank)
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    frame = q[:, :rank]
    s = (frame * np.asarray(spectrum)) @ frame.T
    return 0.5 * (s + s.T)


def grid_minimize(objective, lo: float, hi: float, stages=GRID_STAGES) -> float:
    """Coarse-to-fine 1-d grid search; final stage step is ``stages[-1]``.

    The kink at zero and the interval endpoints are always candidate points.
    """
    window_lo, window_hi = lo, hi
    best = lo
    for step in stages:
        xs = np.arange(window_lo, window_hi + step, step)
        xs = np.clip(xs, lo, hi)
        xs = np.append(xs, [0.0, lo, hi])
        xs = xs[(xs >= lo) & (xs <= hi)]
        vals = objective(xs)
        best = float(xs[np.argmin(vals)])
        window_lo, window_hi = max(lo, best - 2 * step), min(hi, best + 2 * step)
    return best


def prox_scalar_oracle(lam: float, theta: float, lo: float, hi: float, mu: float = 0.0) -> float:
    def objective(x):
        return 0.5 * (x - lam) ** 2 + theta * np.abs(x) + 0.5 * mu * x * x

    return grid_minimize(objective, lo, hi)


def prox_eigenvalues_oracle(lams: np.ndarray, theta: float, constraint) -> np.ndarray:
    """Grid-search solution of the eigenvalue prox problem, per constraint.

    Unconstrained and operator-ball instances are separable per eigenvalue.
    The Frobenius ball couples them through one scalar dual multiplier,
    located by bisection on the norm of the per-eigenvalue grid solutions.
    """
    lams = np.asarray(lams, dtype=float)
    radius = float(np.max(np.abs(lams))) + theta + 1.0

    if isinstance(constraint, Unconstrained):
        return np.array([prox_scalar_oracle(l, theta, -radius, radius) for l in lams])
    if isinstance(constraint, OperatorNormBall):
        rho = constraint.rho
        return np.array([prox_scalar_oracle(l, theta, -rho, rho) for l in lams])
    if isinstance(constraint, FrobeniusBall):
        rho = constraint.rho

        def solve_for(mu: float) -> np.ndarray:
            return np.array(
                [prox_scalar_oracle(l, theta, -radius, radius, mu=mu) for l in lams]
            )

        x = solve_for(0.0)
        if np.linalg.norm(x) <= rho + 1e-12:
            return x
        mu_lo, mu_hi = 0.0, 1.0
        while np.linalg.norm(solve_for(mu_hi)) > rho:
            mu_hi *= 2.0
        for _ in range(50):
            mid = 0.5 * (mu_lo + mu_hi)
            if np.linalg.norm(solve_for(mid)) > rho:
                mu_lo = mid
            else:
                mu_hi = mid
        return solve_for(mu_hi)
    raise AssertionError(f"unknown constraint {constraint!r}")


def least_squares_oracle(data: Dataset) -> np.ndarray:
    """Unpenalized least squares by explicit normal equations over an
    orthonormal basis of the symmetric matrix space."""
    m = data.design.dim
    basis = orthonormal_basis_design(m).atoms
    features = np.einsum("nij,kij->nk", data.covariates(), basis)
    coef, *_ = np.linalg.lstsq(features, data.y, rcond=None)
    return np.tensordot(coef, basis, axes=1)


def directional_derivative(fn, s: np.ndarray, h: np.ndarray, step: float = 1e-6) -> float:
    return (fn(s + step * h) - fn(s - step * h)) / (2.0 * step)
