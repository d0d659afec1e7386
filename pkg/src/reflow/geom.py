"""Geometric verification of the projected immersions.

Points of U/K are realised in an ambient linear space: the vector F e_m for
the space-form family (sphere or hyperboloid of the form S), and the
projector F Pi0 F^{-1} onto a J0-invariant 2-plane for the Lagrangian
family.  ``iota`` is the differential of that orbit map at the base point;
on p it is a homothety for the ambient inner product, so all normal-space
computations can be done in algebra coordinates.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import expm

from . import fd
from .liecore import Family, SymmetricPairSpec, project, trace_form
from .loops import ConnectionField, GridChart, loop_coefficients, r_lambda
from .zerocurv import _GL, FrameField, _magnus6, integrate_frame, mc_residual, regularity_check

FD_ORDER = 6
MARGIN = 3          # boundary layers skipped by every nested finite-difference check
PHASE_PER_STEP = 0.25   # largest h |alpha| before the embedding stencil is refined

CSV_COLUMNS = ("family", "n", "k", "lambda", "R_lambda", "metric_scaling", "sec_mean", "sec_dev",
               "normal_comm", "lagrangian", "curved_flat", "flat_metric", "asym_ratio", "regularity")

BUDGETS = {
    "metric_scaling": 1e-10,
    "sec_dev": 1e-3,
    "ii_discrepancy": 1e-4,
    "normal_comm": 1e-6,
    "lagrangian": 1e-8,
    "curved_flat": 1e-10,
    "flat_metric": 1e-4,
    "drift": 1e-8,
}
ASYM_RATIO_RANGE = (90.0, 110.0)


class CalibrationError(RuntimeError):
    pass


def _interior(n):
    return (slice(MARGIN, -MARGIN),) * n


# ---------------------------------------------------------------------------
# base point, orbit map and ambient inner product

def base_point(spec: SymmetricPairSpec) -> np.ndarray:
    m = spec.m
    if spec.family is Family.SPACE_FORM:
        o = np.zeros(m)
        o[-1] = 1.0
        return o
    P = np.zeros((m, m))
    P[spec.n, spec.n] = P[m - 1, m - 1] = 1.0
    return P


def iota(Z: np.ndarray, spec: SymmetricPairSpec) -> np.ndarray:
    """Tangent vector at the base point generated by Z (works on stacks)."""
    o = base_point(spec)
    if spec.family is Family.SPACE_FORM:
        return Z @ o
    return Z @ o - o @ Z


def ambient_inner(V: np.ndarray, W: np.ndarray, spec: SymmetricPairSpec) -> np.ndarray:
    if spec.family is Family.SPACE_FORM:
        return np.einsum("...i,i,...i->...", V, spec.signature, W)
    return 0.5 * np.einsum("...ij,...ji->...", V, W)


def pull_back(F: np.ndarray, V: np.ndarray, spec: SymmetricPairSpec) -> np.ndarray:
    """Translate ambient vectors at F.o back to the base point."""
    S = spec.S
    Finv = S @ np.swapaxes(F, -1, -2) @ S
    if spec.family is Family.SPACE_FORM:
        return np.einsum("...ij,...j->...i", Finv, V)
    return Finv @ V @ F


def p_metric_sign(spec: SymmetricPairSpec) -> float:
    """Sign relating the ambient norm of iota(Z) to the trace form on p'."""
    Z = spec.bases["mm"][0]
    return float(np.sign(ambient_inner(iota(Z, spec), iota(Z, spec), spec) / trace_form(Z, Z)))


def normal_frame(spec: SymmetricPairSpec) -> tuple[np.ndarray, np.ndarray]:
    """Unit ambient normals iota(E_r) for an orthogonal basis of p'-perp, and their signs."""
    E = spec.bases["mp"]
    V = iota(E, spec)
    nrm = ambient_inner(V, V, spec)
    return V / np.sqrt(np.abs(nrm))[(slice(None),) + (None,) * (V.ndim - 1)], np.sign(nrm)


# ---------------------------------------------------------------------------
# projections

@dataclass
class ProjectionField:
    chart: GridChart
    lam: float
    points: np.ndarray       # chart.shape + (m,) or chart.shape + (m, m)
    family: Family

    def invariant_residual(self, spec: SymmetricPairSpec) -> float:
        X = self.points
        if self.family is Family.SPACE_FORM:
            return float(np.abs(ambient_inner(X, X, spec) - spec.signature[-1]).max())
        J0 = spec.J0
        return float(max(np.abs(X @ X - X).max(),
                         np.abs(np.trace(X, axis1=-2, axis2=-1) - 2.0).max(),
                         np.abs(X @ J0 - J0 @ X).max()))


def project_UK(frame: FrameField, spec: SymmetricPairSpec | None = None,
               drift_tol: float = 1e-6) -> ProjectionField:
    spec = spec or frame.spec
    drift = frame.form_drift()
    if drift > drift_tol:
        raise ValueError(f"frame drift {drift:.2e} exceeds {drift_tol:.1e}")
    o = base_point(spec)
    F = frame.F
    if spec.family is Family.SPACE_FORM:
        pts = F @ o
    else:
        pts = F @ o @ frame.inverse()
    return ProjectionField(frame.chart, frame.lam, pts, spec.family)


def reflective_residual(proj: ProjectionField, spec: SymmetricPairSpec) -> float:
    """Distance of the image from the reflective submanifold through the base point.

    That submanifold is the orbit of exp(p'), contained in the fixed set of PQ.
    """
    R = spec.P @ spec.Q
    X = proj.points
    if proj.family is Family.SPACE_FORM:
        return float(np.abs(X @ R.T - X).max())
    return float(np.abs(R @ X @ R - X).max())


# ---------------------------------------------------------------------------
# metric

def raw_metric(field: ConnectionField, lam: float) -> np.ndarray:
    """Ambient-induced metric before calibration: t^2 <iota c_i, iota c_j>."""
    _, t = loop_coefficients(lam)
    spec = field.spec
    V = iota(field.c, spec)
    tail = (slice(None),) * (1 if spec.family is Family.SPACE_FORM else 2)
    Vi = V[(Ellipsis, slice(None), None) + tail]
    Vj = V[(Ellipsis, None, slice(None)) + tail]
    G = ambient_inner(Vi, Vj, spec)
    return t * t * G


def induced_metric(field: ConnectionField, lam: float, spec: SymmetricPairSpec | None = None) -> np.ndarray:
    """g_lambda(d_i, d_j) = kappa (lambda + 1/lambda)^2 <c_i, c_j> (ambient sign convention)."""
    spec = spec or field.spec
    reg = regularity_check(field)
    if not reg.ok:
        raise ValueError(f"degenerate coframe (sigma_min {reg.sigma_min:.2e} at {reg.location})")
    return spec.curvature_scale * raw_metric(field, lam)


def metric_scaling_residual(field: ConnectionField, lam: float) -> float:
    g1 = induced_metric(field, 1.0)
    gl = induced_metric(field, lam)
    return float(np.abs(gl - r_lambda(lam) ** 2 * g1).max())


def intrinsic_curvatures(g: np.ndarray, chart: GridChart, order: int = FD_ORDER) -> np.ndarray:
    """Coordinate-plane sectional curvatures at interior points, stacked on the last axis."""
    K = fd.sectional_curvatures(g, chart.spacing, order)
    return np.stack([v[_interior(chart.n)] for v in K.values()], axis=-1)


def calibrate(spec: SymmetricPairSpec, field: ConnectionField, ii_tol: float = 1e-6,
              frame: FrameField | None = None) -> SymmetricPairSpec:
    """Fix curvature_scale so the totally geodesic lambda = 1 image has curvature +-1."""
    frame = frame or integrate_frame(field, 1.0)
    ii = second_fundamental_form(frame, field, 1.0, spec)
    if ii.numeric_max > ii_tol:
        raise CalibrationError(f"lambda=1 second fundamental form {ii.numeric_max:.2e} is not zero")
    K = intrinsic_curvatures(raw_metric(field, 1.0), field.chart)
    kappa = float(abs(np.mean(K)))
    if not np.isfinite(kappa) or kappa == 0.0:
        raise CalibrationError("lambda=1 curvature is zero or undefined")
    return spec.with_scale(kappa)


# ---------------------------------------------------------------------------
# second fundamental form

@dataclass
class SecondFundamentalForm:
    algebraic: np.ndarray      # grid + (n, n, k) on unit normals
    numeric: np.ndarray        # same, interior points only
    discrepancy: float
    symmetry: float
    numeric_max: float


def position_field(frame: FrameField, spec: SymmetricPairSpec) -> np.ndarray:
    o = base_point(spec)
    if spec.family is Family.SPACE_FORM:
        return frame.F @ o
    return frame.F @ o @ frame.inverse()


def _ii_algebraic(field, lam, spec, normals):
    s, t = loop_coefficients(lam)
    b, c = field.b, field.c
    B = s * t * (b[..., :, None, :, :] @ c[..., None, :, :, :] - c[..., None, :, :, :] @ b[..., :, None, :, :])
    V = iota(project(B, spec, "mp"), spec)
    raw = np.stack([ambient_inner(V, nu, spec) for nu in normals], axis=-1)
    return raw


def embedding_step(field: ConnectionField, lam: float) -> float:
    """Stencil step for II_num: the grid spacing unless alpha turns too far per cell."""
    h = min(field.chart.spacing)
    if field.sampler is None:
        return h
    A = float(np.linalg.norm(field.alpha(lam), axis=(-1, -2)).max())
    return h if h * A <= PHASE_PER_STEP else PHASE_PER_STEP / A


def _orbit(G, spec):
    o = base_point(spec)
    if spec.family is Family.SPACE_FORM:
        return G @ o
    return G @ o @ (spec.S @ np.swapaxes(G, -1, -2) @ spec.S)


def _local_second_derivatives(field, lam, spec, delta, order, inner):
    """d_i d_j of y -> Phi_x(y) o at each interior x, with stencil step ``delta``.

    Phi_x(y) is the propagator of the connection from x, so this equals the
    embedding's second derivatives pulled back by F(x).  Off-grid values are
    reached by Magnus steps with the field's sampler; flatness makes the
    path (axis i first, then axis j) irrelevant.
    """
    n, m = field.n, spec.m
    r = order // 2
    w1 = fd.stencil(tuple(range(-r, r + 1)), 1) / delta
    w2 = fd.stencil(tuple(range(-r, r + 1)), 2) / delta ** 2
    s_, t_ = loop_coefficients(lam)
    pts0 = field.chart.points()[inner]
    eye = np.broadcast_to(np.eye(m), pts0.shape[:-1] + (m, m))

    def step(G, pts, axis, dx):
        samples = []
        for c in _GL:
            q = pts.copy()
            q[..., axis] += c * dx
            a, b, cc = field.sampler(q)
            samples.append((a + s_ * b + t_ * cc)[..., axis, :, :])
        nxt = pts.copy()
        nxt[..., axis] += dx
        return G @ expm(_magnus6(*samples, dx)), nxt

    lines = []
    for i in range(n):
        line = {0: (eye, pts0)}
        for sgn in (1, -1):
            G, p = eye, pts0
            for k in range(1, r + 1):
                G, p = step(G, p, i, sgn * delta)
                line[sgn * k] = (G, p)
        lines.append(line)
    o0 = _orbit(eye, spec)
    lead = (slice(None),) * (pts0.ndim - 1)
    out = np.zeros(pts0.shape[:-1] + (n, n) + o0.shape[pts0.ndim - 1:])
    for i in range(n):
        out[lead + (i, i)] = sum(w2[k + r] * _orbit(lines[i][k][0], spec) for k in range(-r, r + 1))
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(-r, r + 1):
                if k == 0:
                    continue
                G, p = lines[i][k]
                walk = {}
                for sgn in (1, -1):
                    Gl, pl = G, p
                    for l_ in range(1, r + 1):
                        Gl, pl = step(Gl, pl, j, sgn * delta)
                        walk[sgn * l_] = Gl
                # the central first-derivative weight is zero
                acc = acc + w1[k + r] * sum(w1[l_ + r] * _orbit(Gl, spec) for l_, Gl in walk.items())
            out[lead + (i, j)] = acc
            out[lead + (j, i)] = acc
    return out


def second_fundamental_form(frame: FrameField, field: ConnectionField, lam: float,
                            spec: SymmetricPairSpec | None = None,
                            order: int = FD_ORDER, step: float | None = None) -> SecondFundamentalForm:
    """II two ways: bracket formula s t [b_i, c_j] in p'-perp, and FD of the embedding.

    The numeric route differentiates the embedding on the grid, or, when the
    frame turns too fast per grid cell (see ``embedding_step``), on a finer
    local stencil around each grid point.  Components are taken on the
    frame-translated unit normals in the uncalibrated ambient scale.
    """
    spec = spec or field.spec
    normals, _ = normal_frame(spec)
    n = field.n
    alg = _ii_algebraic(field, lam, spec, normals)
    sym = float(np.abs(alg - np.swapaxes(alg, -2, -3)).max()) if alg.size else 0.0
    alg_sym = 0.5 * (alg + np.swapaxes(alg, -2, -3))
    inner = _interior(n)
    h = min(field.chart.spacing)
    step = embedding_step(field, lam) if step is None else step
    if step < h:
        d2 = _local_second_derivatives(field, lam, spec, step, order, inner)
        num = np.stack([ambient_inner(d2, nu, spec) for nu in normals], axis=-1)
    else:
        pos = position_field(frame, spec)
        F = frame.F[inner]
        num = np.zeros(F.shape[:-2] + (n, n, len(normals)))
        for i in range(n):
            for j in range(i, n):
                d2 = fd.second_diff(pos, field.chart.spacing, i, j, order)[inner]
                w = pull_back(F, d2, spec)
                vals = np.stack([ambient_inner(w, nu, spec) for nu in normals], axis=-1)
                num[..., i, j, :] = vals
                num[..., j, i, :] = vals
    disc = float(np.abs(num - alg_sym[inner]).max()) if num.size else 0.0
    return SecondFundamentalForm(alg_sym, num, disc, sym, float(np.abs(num).max(initial=0.0)))


def gauss_curvatures(ii: np.ndarray, g_raw: np.ndarray, normal_signs: np.ndarray,
                     ambient_curvature: float) -> np.ndarray:
    """Sectional curvature of each coordinate plane from the Gauss equation."""
    n = g_raw.shape[-1]
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            ext = np.einsum("...r,r,...r->...", ii[..., i, i, :], normal_signs, ii[..., j, j, :]) \
                - np.einsum("...r,r,...r->...", ii[..., i, j, :], normal_signs, ii[..., i, j, :])
            area = g_raw[..., i, i] * g_raw[..., j, j] - g_raw[..., i, j] ** 2
            out.append(ambient_curvature + ext / area)
    return np.stack(out, axis=-1)


@dataclass
class CurvatureCheck:
    expected: float
    mean: float
    deviation: float
    intrinsic_mean: float
    gauss_consistency: float


def expected_curvature(spec: SymmetricPairSpec, lam: float) -> float:
    return spec.ambient_sign / r_lambda(lam) ** 2


def sectional_curvature_check(frame: FrameField, field: ConnectionField, lam: float,
                              spec: SymmetricPairSpec, ii: SecondFundamentalForm | None = None) -> CurvatureCheck:
    """Gauss-equation curvature from the numeric II against +-1/R_lambda^2.

    The curvature of the metric itself (finite-difference Christoffel route)
    is checked against the same target; the deviation is the worse of the two.
    """
    if field.n < 2:
        raise ValueError("sectional curvature needs n >= 2")
    ii = ii or second_fundamental_form(frame, field, lam, spec)
    kappa = spec.curvature_scale
    g = raw_metric(field, lam)
    _, signs = normal_frame(spec)
    Kg = gauss_curvatures(ii.numeric, g[_interior(field.n)], signs, spec.ambient_sign * kappa) / kappa
    Ki = intrinsic_curvatures(g, field.chart) / kappa
    exp_ = expected_curvature(spec, lam)
    dev = max(float(np.abs(Kg - exp_).max()), float(np.abs(Ki - exp_).max()))
    return CurvatureCheck(exp_, float(Kg.mean()), dev, float(Ki.mean()),
                          float(np.abs(Kg - Ki).max()))


# ---------------------------------------------------------------------------
# normal bundle, Lagrangian, curved flats

def shape_operators(ii: np.ndarray, g_raw: np.ndarray) -> np.ndarray:
    """A_r = g^{-1} II_r, stacked as grid + (k, n, n)."""
    ginv = np.linalg.inv(g_raw)
    return np.einsum("...ij,...jlr->...ril", ginv, ii)


def normal_bundle_flatness(frame: FrameField, field: ConnectionField, lam: float,
                           spec: SymmetricPairSpec, ii: SecondFundamentalForm | None = None) -> float:
    """max ||[A_r, A_q]|| over interior points and normal pairs (Ricci equation in a space form)."""
    ii = ii or second_fundamental_form(frame, field, lam, spec)
    return shape_commutator(ii.numeric, raw_metric(field, lam)[_interior(field.n)])


def shape_commutator(ii: np.ndarray, g_raw: np.ndarray) -> float:
    A = shape_operators(ii, g_raw)
    k = A.shape[-3]
    worst = 0.0
    for r in range(k):
        for q in range(r + 1, k):
            C = A[..., r, :, :] @ A[..., q, :, :] - A[..., q, :, :] @ A[..., r, :, :]
            worst = max(worst, float(np.linalg.norm(C, axis=(-1, -2)).max()))
    return worst


def lagrangian_residual(frame: FrameField, field: ConnectionField, lam: float,
                        spec: SymmetricPairSpec) -> float:
    """max |omega(theta_i, theta_j)|, omega(V, W) = <J0 [P, V], W> at P = F Pi0 F^{-1}.

    theta_i = F iota(t c_i) F^{-1} is the frame-translated coframe.
    """
    if spec.family is not Family.LAGRANGIAN:
        raise ValueError("lagrangian_residual needs the Lagrangian family")
    _, t = loop_coefficients(lam)
    F = frame.F
    Finv = frame.inverse()
    P = position_field(frame, spec)
    J0 = spec.J0
    theta = F[..., None, :, :] @ iota(t * field.c, spec) @ Finv[..., None, :, :]
    om = kahler_pairing(P[..., None, None, :, :], theta[..., :, None, :, :], theta[..., None, :, :, :], J0)
    return float(np.abs(om).max())


def kahler_rotation(P: np.ndarray, V: np.ndarray, J0: np.ndarray) -> np.ndarray:
    """J V = J0 [P, V] for a tangent vector V at the projector P."""
    return J0 @ (P @ V - V @ P)


def kahler_pairing(P: np.ndarray, V: np.ndarray, W: np.ndarray, J0: np.ndarray) -> np.ndarray:
    """omega(V, W) = 1/2 tr(J V W) at the projector P."""
    return 0.5 * np.einsum("...kl,...lk->...", kahler_rotation(P, V, J0), W)


def curved_flat_residual(field: ConnectionField) -> float:
    """max ||[beta_inf_i, beta_inf_j]||, i < j."""
    X = field.beta_inf()
    worst = 0.0
    for i in range(field.n):
        for j in range(i + 1, field.n):
            C = X[..., i, :, :] @ X[..., j, :, :] - X[..., j, :, :] @ X[..., i, :, :]
            worst = max(worst, float(np.linalg.norm(C, axis=(-1, -2)).max()))
    return worst


def asymptotic_distance(field: ConnectionField, lam: float) -> float:
    """max_i ||beta(d_i)/lambda - beta_inf(d_i)|| over the grid."""
    s, t = loop_coefficients(lam)
    D = (s * field.b + t * field.c) / lam - field.beta_inf()
    return float(np.linalg.norm(D, axis=(-1, -2)).max())


def asymptotic_flat_check(field: ConnectionField, lams=(10.0, 100.0)) -> tuple[list[float], list[float]]:
    """Distances d(lambda) and the ratios d(lambda_k) / d(lambda_{k+1})."""
    lams = [float(x) for x in lams]
    if any(abs(x) < 10 for x in lams):
        raise ValueError("asymptotic check needs |lambda| >= 10")
    d = [asymptotic_distance(field, x) for x in lams]
    ratios = [d[i] / d[i + 1] if d[i + 1] > 0 else math.inf for i in range(len(d) - 1)]
    return d, ratios


def beta_inf_metric(field: ConnectionField) -> np.ndarray:
    X = field.beta_inf()
    return -0.5 * np.einsum("...ikl,...jlk->...ij", X, X)


def metric_flatness(g: np.ndarray, chart: GridChart, order: int = FD_ORDER) -> float:
    """max |sectional curvature| over coordinate planes at interior points."""
    det = np.linalg.det(g)
    if np.abs(det).min() < 1e-14:
        raise ValueError("degenerate metric")
    return float(np.abs(intrinsic_curvatures(g, chart, order)).max())


def flat_metric_residual(field: ConnectionField, spec: SymmetricPairSpec | None = None,
                         order: int = FD_ORDER) -> float:
    """Curvature of (X, Y) = <beta_inf X, beta_inf Y>; zero when that metric is flat."""
    return metric_flatness(beta_inf_metric(field), field.chart, order)


def round_metric(chart: GridChart, radius: float = 1.0) -> np.ndarray:
    """r^2 (dx0^2 + sin^2 x0 dx1^2) on a 2-d chart; constant curvature 1/r^2 (negative control)."""
    if chart.n != 2:
        raise ValueError("round metric needs a 2-d chart")
    theta = chart.points()[..., 0]
    if np.abs(np.sin(theta)).min() < 1e-3:
        raise ValueError("chart reaches a pole of the round metric")
    g = np.zeros(chart.shape + (2, 2))
    g[..., 0, 0] = radius**2
    g[..., 1, 1] = (radius * np.sin(theta)) ** 2
    return g


# ---------------------------------------------------------------------------
# report

@dataclass
class GeometryReport:
    family: str
    n: int
    k: int
    lam: float
    R_lambda: float
    metric_scaling: float
    sec_mean: float
    sec_dev: float
    normal_comm: float
    lagrangian: float | None
    curved_flat: float
    flat_metric: float
    asym_ratio: float
    regularity: float
    sec_expected: float = 0.0
    sec_intrinsic: float = 0.0
    gauss_consistency: float = 0.0
    ii_discrepancy: float = 0.0
    ii_symmetry: float = 0.0
    ii_max: float = 0.0
    drift: float = 0.0
    mc_max: float = 0.0
    curvature_scale: float = 1.0
    totally_geodesic: bool = False
    failures: list[str] = field(default_factory=list)

    def csv_row(self) -> list[str]:
        vals = {"family": self.family, "n": self.n, "k": self.k, "lambda": self.lam,
                "R_lambda": self.R_lambda, "metric_scaling": self.metric_scaling,
                "sec_mean": self.sec_mean, "sec_dev": self.sec_dev, "normal_comm": self.normal_comm,
                "lagrangian": "n/a" if self.lagrangian is None else self.lagrangian,
                "curved_flat": self.curved_flat, "flat_metric": self.flat_metric,
                "asym_ratio": self.asym_ratio, "regularity": self.regularity}
        return [_fmt(vals[c]) for c in CSV_COLUMNS]

    def to_json(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @property
    def ok(self) -> bool:
        return not self.failures


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def evaluate_budgets(rep: GeometryReport, budgets: dict | None = None) -> list[str]:
    b = dict(BUDGETS)
    b.update(budgets or {})
    checks = {
        "metric_scaling": rep.metric_scaling,
        "sec_dev": rep.sec_dev,
        "ii_discrepancy": rep.ii_discrepancy,
        "normal_comm": rep.normal_comm,
        "curved_flat": rep.curved_flat,
        "flat_metric": rep.flat_metric,
        "drift": rep.drift,
    }
    if rep.lagrangian is not None:
        # the shape-operator criterion needs a constant-curvature ambient
        checks["lagrangian"] = rep.lagrangian
        del checks["normal_comm"]
    failed = [name for name, v in checks.items() if not v <= b[name]]
    lo, hi = b.get("asym_ratio_lo", ASYM_RATIO_RANGE[0]), b.get("asym_ratio_hi", ASYM_RATIO_RANGE[1])
    if not lo <= rep.asym_ratio <= hi:
        failed.append("asym_ratio")
    if not rep.regularity > b.get("regularity", 0.0):
        failed.append("regularity")
    return failed


def full_report(field: ConnectionField, spec: SymmetricPairSpec | None, lam: float,
                calibrated: SymmetricPairSpec | None = None, budgets: dict | None = None,
                frame_1: FrameField | None = None) -> GeometryReport:
    """Calibrate once at lambda = 1, then run every check at ``lam``."""
    spec = spec or field.spec
    if calibrated is None:
        calibrated = calibrate(spec, field, frame=frame_1)
    reg = regularity_check(field)
    frame = integrate_frame(field, lam)
    ii = second_fundamental_form(frame, field, lam, calibrated)
    curv = sectional_curvature_check(frame, field, lam, calibrated, ii)
    ncomm = normal_bundle_flatness(frame, field, lam, calibrated, ii)
    lag = lagrangian_residual(frame, field, lam, calibrated) if spec.family is Family.LAGRANGIAN else None
    _, ratios = asymptotic_flat_check(field, (10.0, 100.0))
    rep = GeometryReport(
        family=spec.family.value, n=spec.n, k=spec.k, lam=float(lam), R_lambda=r_lambda(lam),
        metric_scaling=metric_scaling_residual(field.replace(spec=calibrated), lam),
        sec_mean=curv.mean, sec_dev=curv.deviation, normal_comm=ncomm, lagrangian=lag,
        curved_flat=curved_flat_residual(field), flat_metric=flat_metric_residual(field),
        asym_ratio=ratios[0], regularity=reg.sigma_min, sec_expected=curv.expected,
        sec_intrinsic=curv.intrinsic_mean, gauss_consistency=curv.gauss_consistency,
        ii_discrepancy=ii.discrepancy, ii_symmetry=ii.symmetry, ii_max=ii.numeric_max,
        drift=frame.form_drift(), mc_max=mc_residual(field).max(),
        curvature_scale=calibrated.curvature_scale, totally_geodesic=abs(abs(lam) - 1.0) < 1e-15)
    rep.failures = evaluate_budgets(rep, budgets)
    return rep


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def reports_json(reports) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True) + "\n"
