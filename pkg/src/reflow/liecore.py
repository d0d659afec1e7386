"""Matrix Lie algebra substrate for the two symmetric-pair configurations.

Everything is real: the su(n+1) case lives inside so(2n+2) as the matrices
commuting with the complex structure ``J0``.  The four simultaneous
eigenspaces of ``Ad_Q`` (tau) and ``Ad_P`` (sigma) are indexed by sign pairs
``(tau, sigma)``, e.g. ``"pm"`` is tau = +1, sigma = -1.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import null_space

SUBSPACES = ("pp", "pm", "mp", "mm")
_SIGNS = {"pp": (1, 1), "pm": (1, -1), "mp": (-1, 1), "mm": (-1, -1)}

MEMBERSHIP_TOL = 1e-10


class Family(str, enum.Enum):
    SPACE_FORM = "SpaceForm"
    LAGRANGIAN = "LagrangianProjective"


class NotInAlgebraError(ValueError):
    """Raised when a matrix is not in the ambient algebra."""

    def __init__(self, residual: float):
        super().__init__(f"matrix is not in the algebra (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class SymmetricPairSpec:
    family: Family
    n: int
    k: int
    P: np.ndarray
    Q: np.ndarray
    signature: np.ndarray
    curvature_scale: float = 1.0
    J0: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.P.shape[0]

    @property
    def S(self) -> np.ndarray:
        return np.diag(self.signature).astype(float)

    @property
    def hyperbolic(self) -> bool:
        return bool(np.any(self.signature < 0))

    @property
    def ambient_sign(self) -> float:
        """Sectional curvature sign of the target space form."""
        return -1.0 if self.hyperbolic else 1.0

    def with_scale(self, kappa: float) -> "SymmetricPairSpec":
        return SymmetricPairSpec(self.family, self.n, self.k, self.P, self.Q,
                                 self.signature, float(kappa), self.J0)

    def membership_residual(self, X: np.ndarray) -> float:
        """Distance of ``X`` from the ambient algebra (form-skew, and su for Lagrangian)."""
        X = np.asarray(X, dtype=float)
        S = self.S
        r = np.abs(X.T @ S + S @ X).max(initial=0.0)
        if self.J0 is not None:
            r = max(r, np.abs(X @ self.J0 - self.J0 @ X).max(initial=0.0),
                    abs(np.trace(self.J0 @ X)))
        return float(r)

    def tau(self, X):
        return self.Q @ X @ self.Q

    def sigma(self, X):
        return self.P @ X @ self.P

    # bases are cached per instance; they depend only on P, Q, S, J0
    @cached_property
    def algebra_basis(self) -> np.ndarray:
        return _algebra_basis(self.m, self.S, self.J0)

    @cached_property
    def bases(self) -> dict[str, np.ndarray]:
        out = {}
        for name in SUBSPACES:
            comps = np.array([_project(X, self, name) for X in self.algebra_basis])
            out[name] = _orthonormal_span(comps)
        return out

    @property
    def dims(self) -> dict[str, int]:
        return {name: len(b) for name, b in self.bases.items()}

    @cached_property
    def minus_basis(self) -> np.ndarray:
        """Basis of the sigma = -1 space, pm block first then mm block."""
        return np.concatenate([self.bases["pm"], self.bases["mm"]])

    def __repr__(self) -> str:
        sig = "hyperbolic" if self.hyperbolic else "compact"
        return (f"SymmetricPairSpec({self.family.value}, n={self.n}, k={self.k}, "
                f"m={self.m}, {sig}, kappa={self.curvature_scale:.6g})")


def _algebra_basis(m, S, J0):
    # linear constraints on vec(X), row-major
    eye = np.eye(m)
    rows = [np.kron(eye, S) @ _transpose_op(m) + np.kron(S, eye)]
    if J0 is not None:
        rows.append(np.kron(eye, J0.T) - np.kron(J0, eye))
        rows.append(J0.T.reshape(1, -1))
    ns = null_space(np.vstack(rows))
    return _orthonormal_span(ns.T.reshape(-1, m, m))


def _transpose_op(m):
    T = np.zeros((m * m, m * m))
    for i, j in itertools.product(range(m), repeat=2):
        T[i * m + j, j * m + i] = 1.0
    return T


def _orthonormal_span(mats: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Frobenius-orthonormal spanning set, scaled to |X|_F^2 = 2."""
    if len(mats) == 0:
        return np.zeros((0,) + mats.shape[1:])
    shape = mats.shape[1:]
    flat = mats.reshape(len(mats), -1)
    _, s, vt = np.linalg.svd(flat, full_matrices=False)
    r = int(np.sum(s > tol * max(s[0], 1.0)))
    return np.sqrt(2.0) * vt[:r].reshape((r,) + shape)


def _project(X, spec, name):
    e, d = _SIGNS[name]
    QX = spec.tau(X)
    return (X + e * QX + d * spec.sigma(X) + e * d * spec.sigma(QX)) / 4.0


def _check_n(n):
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")


def build_space_form_pair(n: int, k: int, hyperbolic: bool = False) -> SymmetricPairSpec:
    """Sphere S^{n+k} (or hyperbolic space) with the reflective great S^n."""
    _check_n(n)
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    m = n + k + 1
    P = np.diag([1.0] * n + [-1.0] * (k + 1))
    Q = np.diag([1.0] * (n + k) + [-1.0])
    sig = np.ones(m)
    if hyperbolic:
        sig[-1] = -1.0
    return SymmetricPairSpec(Family.SPACE_FORM, n, k, P, Q, sig)


def build_lagrangian_pair(n: int, hyperbolic: bool = False) -> SymmetricPairSpec:
    """CP^n with its totally geodesic Lagrangian RP^n, real model inside so(2n+2)."""
    _check_n(n)
    m = 2 * n + 2
    P = np.diag([1.0] * (n + 1) + [-1.0] * (n + 1))
    q = [1.0] * n + [-1.0]
    Q = np.diag(q + q)
    J0 = np.block([[np.zeros((n + 1, n + 1)), -np.eye(n + 1)],
                   [np.eye(n + 1), np.zeros((n + 1, n + 1))]])
    sig = np.ones(m)
    if hyperbolic:
        # must commute with J0, so both copies of the last complex coordinate flip
        sig[n] = sig[2 * n + 1] = -1.0
    return SymmetricPairSpec(Family.LAGRANGIAN, n, n, P, Q, sig, J0=J0)


def trace_form(X: np.ndarray, Y: np.ndarray) -> float:
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise ValueError(f"size mismatch {X.shape} vs {Y.shape}")
    return float(-np.einsum("ij,ji->", X, Y) / 2.0)


def bracket(X, Y):
    return X @ Y - Y @ X


@dataclass(frozen=True)
class FourComponents:
    pp: np.ndarray
    pm: np.ndarray
    mp: np.ndarray
    mm: np.ndarray

    def total(self) -> np.ndarray:
        return self.pp + self.pm + self.mp + self.mm

    def __getitem__(self, name: str) -> np.ndarray:
        return getattr(self, name)


def decompose(X: np.ndarray, spec: SymmetricPairSpec, tol: float = MEMBERSHIP_TOL) -> FourComponents:
    X = np.asarray(X, dtype=float)
    res = spec.membership_residual(X)
    if res > tol * max(1.0, np.abs(X).max(initial=0.0)):
        raise NotInAlgebraError(res)
    return FourComponents(*(_project(X, spec, name) for name in SUBSPACES))


def project(X: np.ndarray, spec: SymmetricPairSpec, name: str) -> np.ndarray:
    """Single eigenspace component, no membership check (works on stacks)."""
    X = np.asarray(X, dtype=float)
    e, d = _SIGNS[name]
    QX = spec.Q @ X @ spec.Q
    return (X + e * QX + d * (spec.P @ X @ spec.P) + e * d * (spec.P @ QX @ spec.P)) / 4.0


def random_element(spec: SymmetricPairSpec, name: str | None, rng: np.random.Generator) -> np.ndarray:
    basis = spec.algebra_basis if name is None else spec.bases[name]
    return np.einsum("a,aij->ij", rng.standard_normal(len(basis)), basis)


_RELATIONS = {
    # (left, right, target)
    "[k+,p']<p'": ("pp", "mm", "mm"),
    "[k+,p'perp]<p'perp": ("pp", "mp", "mp"),
    "[k-,p']<p'perp": ("pm", "mm", "mp"),
    "[k-,p'perp]<p'": ("pm", "mp", "mm"),
}


def _outside(Z, spec, target):
    return float(np.abs(Z - project(Z, spec, target)).max(initial=0.0))


def check_bracket_relations(spec: SymmetricPairSpec, trials: int = 100, seed: int = 0) -> dict[str, float]:
    """Worst out-of-target component of each of the four bracket inclusions."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    out = {}
    for label, (left, right, target) in _RELATIONS.items():
        worst = 0.0
        for _ in range(trials):
            Z = bracket(random_element(spec, left, rng), random_element(spec, right, rng))
            worst = max(worst, _outside(Z, spec, target))
        out[label] = worst
    return out


def lie_triple_residual(spec: SymmetricPairSpec, trials: int = 100, seed: int = 0) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    out = {}
    for name in ("mm", "mp"):
        worst = 0.0
        for _ in range(trials):
            X, Y, Z = (random_element(spec, name, rng) for _ in range(3))
            worst = max(worst, _outside(bracket(X, bracket(Y, Z)), spec, name))
        out[name] = worst
    return out


@dataclass
class RankResult:
    rank: int
    basis: np.ndarray            # abelian basis of the sigma = -1 space
    p_rank: int                  # rank of the mm-projection of that basis
    trials: int = field(default=0)

    def __int__(self):
        return self.rank


def _coords(X, basis):
    # basis is Frobenius-orthogonal with |B|^2 = 2
    return np.einsum("...ij,aij->...a", X, basis) / 2.0


def centralizer(elements, basis: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Subspace of span(basis) commuting with every matrix in ``elements``."""
    if len(elements) == 0:
        return basis
    cols = []
    for B in basis:
        cols.append(np.concatenate([bracket(X, B).ravel() for X in elements]))
    M = np.array(cols).T
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    scale = max(s[0], 1.0) if len(s) else 1.0
    r = int(np.sum(s > tol * scale))
    coeffs = vt[r:]
    return np.einsum("ka,aij->kij", coeffs, basis)


def rank_oracle(spec: SymmetricPairSpec, trials: int = 32, seed: int = 0) -> RankResult:
    """Randomized greedy search for a maximal abelian subspace of the sigma = -1 space."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    basis = spec.minus_basis
    best = None
    for _ in range(trials):
        chosen: list[np.ndarray] = []
        C = basis
        while len(C) > len(chosen):
            X = np.einsum("a,aij->ij", rng.standard_normal(len(C)), C)
            for Y in chosen:
                X = X - np.sum(X * Y) / np.sum(Y * Y) * Y
            chosen.append(X)
            C = centralizer(chosen, basis)
        A = _orthonormal_span(np.array(chosen))
        c_parts = project(A, spec, "mm")
        p_rank = _matrix_rank(c_parts)
        key = (len(A), p_rank)
        if best is None or key > (best.rank, best.p_rank):
            best = RankResult(len(A), A, p_rank)
    best.trials = trials
    return best


def _matrix_rank(mats, tol=1e-9):
    if len(mats) == 0:
        return 0
    s = np.linalg.svd(mats.reshape(len(mats), -1), compute_uv=False)
    return int(np.sum(s > tol * max(s[0], 1e-300))) if s[0] > tol else 0
