"""Finite-support design distributions, data generation and exact risks.

A design is a finite list of symmetric atom matrices with sampling
probabilities.  Restricting to finite support makes the L2 norm of the
induced linear functional, the population risk, and the excess risk exactly
computable, which the verification harness relies on.  The canonical design
is uniform sampling from the orthonormal basis of the symmetric matrix
space (the completion-style model).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr, ndtri

from .constraints import ConstraintSet, FrobeniusBall, OperatorNormBall, Unconstrained
from .errors import NumericalError, ValidationError
from .losses import FiniteSet, Interval, LossModel, ResponseDomain
from .matrices import frobenius_norm, nuclear_norm, validate_symmetric

PROB_TOL = 1e-12
ORTHONORMAL_TOL = 1e-9
QUADRATURE_NODES = 64
NOISE_TRUNCATION = 6.0  # truncation at 6 sigma keeps the response domain bounded


@dataclass(frozen=True)
class DesignDistribution:
    """Finite-support law of the matrix covariate."""

    dim: int
    atoms: np.ndarray          # (k, dim, dim)
    probs: np.ndarray          # (k,), sums to 1
    is_orthonormal_basis: bool = False

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if atoms.ndim != 3 or atoms.shape[1:] != (self.dim, self.dim):
            raise ValidationError(f"atoms must be (k, {self.dim}, {self.dim})")
        if probs.shape != (atoms.shape[0],):
            raise ValidationError("one probability per atom required")
        if np.any(probs < 0) or abs(float(np.sum(probs)) - 1.0) > PROB_TOL:
            raise ValidationError("probabilities must be nonnegative and sum to 1")
        for i, atom in enumerate(atoms):
            try:
                validate_symmetric(atom)
            except ValidationError as exc:
                raise ValidationError(f"atom {i}: {exc}") from None
        if self.is_orthonormal_basis:
            gram = np.einsum("aij,bij->ab", atoms, atoms)
            if float(np.max(np.abs(gram - np.eye(atoms.shape[0])))) > ORTHONORMAL_TOL:
                raise ValidationError("atoms are not pairwise Frobenius-orthonormal")
            if float(np.max(np.abs(probs - 1.0 / atoms.shape[0]))) > PROB_TOL:
                raise ValidationError("orthonormal-basis designs must be uniform")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @property
    def num_atoms(self) -> int:
        return self.atoms.shape[0]


def orthonormal_basis_design(m: int) -> DesignDistribution:
    """Uniform sampling from the m(m+1)/2 symmetric basis matrices.

    Diagonal units e_i e_i^T come first, then (e_i e_j^T + e_j e_i^T)/sqrt(2)
    for i < j in lexicographic order.
    """
    if m < 1:
        raise ValidationError("dimension must be at least 1")
    atoms = []
    for i in range(m):
        e = np.zeros((m, m))
        e[i, i] = 1.0
        atoms.append(e)
    for i in range(m):
        for j in range(i + 1, m):
            e = np.zeros((m, m))
            e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            atoms.append(e)
    k = len(atoms)
    return DesignDistribution(
        dim=m,
        atoms=np.stack(atoms),
        probs=np.full(k, 1.0 / k),
        is_orthonormal_basis=True,
    )


def custom_design(atoms: np.ndarray, probs: np.ndarray) -> DesignDistribution:
    """Finite design from explicit atoms and probabilities."""
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim != 3:
        raise ValidationError("atoms must be a (k, m, m) stack")
    return DesignDistribution(dim=atoms.shape[1], atoms=atoms, probs=probs)


def functional_l2_norm(a: np.ndarray, design: DesignDistribution) -> float:
    """Exact L2 norm of x -> <A, x> under the design law.

    For a uniform orthonormal-basis design this equals the Frobenius norm
    of ``a`` divided by sqrt(#atoms).
    """
    a = validate_symmetric(a)
    if a.shape[0] != design.dim:
        raise ValidationError(
            f"dimension mismatch: design dim {design.dim}, matrix dim {a.shape[0]}"
        )
    coeffs = np.einsum("kij,ij->k", design.atoms, a)
    return float(np.sqrt(np.sum(design.probs * coeffs**2)))


# -- truth models --------------------------------------------------------------

@dataclass(frozen=True)
class GaussianNoise:
    """Additive centered Gaussian noise truncated to [-c, c], c = truncation * sigma."""

    sigma: float
    truncation: float = NOISE_TRUNCATION

    def __post_init__(self):
        if self.sigma < 0 or self.truncation < 0:
            raise ValidationError("noise scale and truncation must be nonnegative")

    @property
    def cutoff(self) -> float:
        return self.sigma * self.truncation


def _symmetric_logistic(s):
    # chosen so the population minimizer of the exponential loss is s itself
    return 1.0 / (1.0 + np.exp(-2.0 * np.asarray(s, dtype=float)))


@dataclass(frozen=True)
class ClassificationLink:
    """Binary responses in {-1, +1} with P(Y = 1 | X) = link(<S*, X>)."""

    link: Callable = _symmetric_logistic


@dataclass(frozen=True)
class TruthModel:
    """Ground-truth matrix plus the conditional law of the response."""

    s_star: np.ndarray
    noise: GaussianNoise | ClassificationLink

    def __post_init__(self):
        object.__setattr__(self, "s_star", validate_symmetric(self.s_star))


def truth_predictions(truth: TruthModel, design: DesignDistribution) -> np.ndarray:
    return np.einsum("kij,ij->k", design.atoms, truth.s_star)


def response_domain(truth: TruthModel, design: DesignDistribution) -> ResponseDomain:
    """Range of the response variable under the truth model."""
    if isinstance(truth.noise, ClassificationLink):
        return FiniteSet((-1.0, 1.0))
    s_max = float(np.max(np.abs(truth_predictions(truth, design))))
    half = s_max + truth.noise.cutoff
    return Interval(-half, half)


# -- datasets ------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Sampled (X_j, Y_j) pairs; covariates stored as atom indices."""

    design: DesignDistribution
    atom_indices: np.ndarray  # (n,)
    y: np.ndarray             # (n,)
    seed: int | None

    def __post_init__(self):
        idx = np.asarray(self.atom_indices, dtype=np.int64)
        y = np.asarray(self.y, dtype=float)
        if idx.ndim != 1 or y.shape != idx.shape:
            raise ValidationError("atom_indices and y must be matched 1-d arrays")
        if idx.size == 0:
            raise ValidationError("dataset must contain at least one sample")
        if np.any(idx < 0) or np.any(idx >= self.design.num_atoms):
            raise ValidationError("atom index out of range")
        object.__setattr__(self, "atom_indices", idx)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.atom_indices.shape[0]

    def covariates(self) -> np.ndarray:
        """The (n, m, m) stack of observed design matrices."""
        return self.design.atoms[self.atom_indices]


def _truncated_gaussian(noise: GaussianNoise, rng: np.random.Generator, size: int) -> np.ndarray:
    if noise.sigma == 0:
        return np.zeros(size)
    # inverse-CDF sampling keeps the draw count independent of rejections
    tail = ndtr(-noise.truncation)
    u = rng.random(size)
    return noise.sigma * ndtri(tail + u * (1.0 - 2.0 * tail))


def sample_dataset(
    design: DesignDistribution,
    truth: TruthModel,
    n: int,
    seed: int,
) -> Dataset:
    """Draw n i.i.d. (X, Y) pairs; deterministic given the seed."""
    if n < 1:
        raise ValidationError("sample count must be at least 1")
    rng = np.random.default_rng(seed)
    idx = rng.choice(design.num_atoms, size=n, p=design.probs)
    s = np.einsum("kij,ij->k", design.atoms[idx], truth.s_star)
    if isinstance(truth.noise, ClassificationLink):
        p = np.asarray(truth.noise.link(s), dtype=float)
        y = np.where(rng.random(n) < p, 1.0, -1.0)
    else:
        y = s + _truncated_gaussian(truth.noise, rng, n)
    return Dataset(design=design, atom_indices=idx, y=y, seed=seed)


def save_dataset(path, dataset: Dataset) -> None:
    """Write the dataset CSV: columns (j, atom_index, y)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "atom_index", "y"])
        for j, (idx, y) in enumerate(zip(dataset.atom_indices, dataset.y)):
            writer.writerow([j, int(idx), repr(float(y))])


def load_dataset(path, design: DesignDistribution) -> Dataset:
    """Read a dataset CSV back against its generating design."""
    indices, ys = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["j", "atom_index", "y"]:
            raise ValidationError(f"{path}: expected header j,atom_index,y")
        for row in reader:
            if len(row) != 3:
                raise ValidationError(f"{path}: malformed row {row!r}")
            indices.append(int(row[1]))
            ys.append(float(row[2]))
    return Dataset(design=design, atom_indices=np.array(indices), y=np.array(ys), seed=None)


# -- prediction bound ----------------------------------------------------------

def prediction_bound(constraint: ConstraintSet, design: DesignDistribution) -> float:
    """Almost-sure bound on |<S, X>| over feasible S and design atoms.

    Dual-norm evaluation per atom: an operator-norm ball of radius rho gives
    rho * max nuclear norm of an atom, a Frobenius ball rho * max Frobenius
    norm.  Unbounded feasible sets leave the bound undefined.
    """
    if isinstance(constraint, Unconstrained):
        raise ValidationError(
            "prediction bound undefined for an unconstrained feasible set; "
            "supply the bound explicitly"
        )
    if isinstance(constraint, OperatorNormBall):
        return constraint.rho * max(nuclear_norm(atom) for atom in design.atoms)
    if isinstance(constraint, FrobeniusBall):
        return constraint.rho * max(frobenius_norm(atom) for atom in design.atoms)
    raise ValidationError(f"unknown constraint {constraint!r}")


# -- population and excess risk -------------------------------------------------

@lru_cache(maxsize=8)
def _legendre_nodes(num: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(num)


def _conditional_risk_functions(
    design: DesignDistribution,
    truth: TruthModel,
    loss: LossModel,
    quadrature_nodes: int,
) -> list[Callable[[float], float]]:
    """Per atom, the exact map u -> E[loss(Y; u) | X = atom]."""
    s = truth_predictions(truth, design)
    if isinstance(truth.noise, ClassificationLink):
        p = np.asarray(truth.noise.link(s), dtype=float)

        def make(pi: float):
            return lambda u: float(
                pi * loss.value(1.0, u) + (1.0 - pi) * loss.value(-1.0, u)
            )

        return [make(float(pi)) for pi in p]

    noise = truth.noise
    if noise.sigma == 0 or noise.cutoff == 0:
        return [lambda u, si=float(si): float(loss.value(si, u)) for si in s]

    nodes, weights = _legendre_nodes(quadrature_nodes)
    c = noise.cutoff
    xi = c * nodes
    density = np.exp(-0.5 * (xi / noise.sigma) ** 2) / (
        noise.sigma * np.sqrt(2.0 * np.pi)
    )
    mass = 1.0 - 2.0 * ndtr(-noise.truncation)
    w = c * weights * density / mass

    def make_quad(si: float):
        ys = si + xi
        return lambda u: float(np.dot(w, np.asarray(loss.value(ys, u), dtype=float)))

    return [make_quad(float(si)) for si in s]


def population_risk(
    s: np.ndarray,
    design: DesignDistribution,
    truth: TruthModel,
    loss: LossModel,
    quadrature_nodes: int = QUADRATURE_NODES,
) -> float:
    """Exact risk of the linear rule x -> <S, x> under the truth model."""
    s = validate_symmetric(s)
    u = np.einsum("kij,ij->k", design.atoms, s)
    fns = _conditional_risk_functions(design, truth, loss, quadrature_nodes)
    per_atom = np.array([fn(ui) for fn, ui in zip(fns, u)])
    if not np.all(np.isfinite(per_atom)):
        raise NumericalError("population risk overflowed; predictions too large for the loss")
    return float(np.dot(design.probs, per_atom))


def bayes_risk_per_atom(
    design: DesignDistribution,
    truth: TruthModel,
    loss: LossModel,
    quadrature_nodes: int = QUADRATURE_NODES,
) -> np.ndarray:
    """Per-atom minimal conditional risk inf_u E[loss(Y; u) | X = atom].

    Each infimum is a 1-d convex minimization; the bracket covers every
    conditional minimizer of the registered losses under the finite truth
    models.  Independent of the candidate matrix, so callers evaluating many
    excess risks against one truth should compute this once.
    """
    fns = _conditional_risk_functions(design, truth, loss, quadrature_nodes)
    s = truth_predictions(truth, design)
    cutoff = 0.0 if isinstance(truth.noise, ClassificationLink) else truth.noise.cutoff
    half = max(1.0, 10.0 * (float(np.max(np.abs(s))) + cutoff))
    out = np.empty(len(fns))
    for i, fn in enumerate(fns):
        res = minimize_scalar(
            fn, bounds=(-half, half), method="bounded", options={"xatol": 1e-10}
        )
        if not res.success:
            raise NumericalError(
                f"conditional risk minimization failed for atom {i}: {res.message}"
            )
        out[i] = float(res.fun)
    return out


def excess_risk(
    s: np.ndarray,
    design: DesignDistribution,
    truth: TruthModel,
    loss: LossModel,
    quadrature_nodes: int = QUADRATURE_NODES,
    bayes: np.ndarray | None = None,
) -> float:
    """Risk of <S, .> minus the minimal risk over all prediction rules."""
    if bayes is None:
        bayes = bayes_risk_per_atom(design, truth, loss, quadrature_nodes)
    risk = population_risk(s, design, truth, loss, quadrature_nodes)
    return max(0.0, risk - float(np.dot(design.probs, bayes)))
