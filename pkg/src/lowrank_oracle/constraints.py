"""Spectral constraint sets for the penalized minimization.

The feasible set is closed, convex, contains zero, and is invariant under
joint orthogonal conjugation, so every projection and proximal step reduces
to an eigenvalue-vector problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Unconstrained:
    pass


@dataclass(frozen=True)
class OperatorNormBall:
    rho: float

    def __post_init__(self):
        # rho == 0 is the degenerate-but-valid feasible set {0}
        if self.rho < 0:
            raise ValidationError("operator-norm ball radius must be nonnegative")


@dataclass(frozen=True)
class FrobeniusBall:
    rho: float

    def __post_init__(self):
        if self.rho < 0:
            raise ValidationError("Frobenius ball radius must be nonnegative")


ConstraintSet = Unconstrained | OperatorNormBall | FrobeniusBall


def constraint_violation(s: np.ndarray, constraint: ConstraintSet) -> float:
    """Nonnegative measure of infeasibility (0 when ``s`` is feasible)."""
    if isinstance(constraint, Unconstrained):
        return 0.0
    if isinstance(constraint, OperatorNormBall):
        lam = np.linalg.eigvalsh(s)
        return max(0.0, float(np.max(np.abs(lam))) - constraint.rho) if lam.size else 0.0
    if isinstance(constraint, FrobeniusBall):
        return max(0.0, float(np.linalg.norm(s)) - constraint.rho)
    raise ValidationError(f"unknown constraint {constraint!r}")


def describe(constraint: ConstraintSet) -> str:
    if isinstance(constraint, Unconstrained):
        return "none"
    if isinstance(constraint, OperatorNormBall):
        return f"operator-ball({constraint.rho:g})"
    if isinstance(constraint, FrobeniusBall):
        return f"frobenius-ball({constraint.rho:g})"
    raise ValidationError(f"unknown constraint {constraint!r}")
