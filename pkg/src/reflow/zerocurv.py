"""Zero-curvature machinery: Maurer-Cartan residuals, frame integration, solution generators."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from . import fd
from .liecore import (SymmetricPairSpec, centralizer, project, rank_oracle,
                      random_element, _coords)
from .loops import (ConnectionField, GridChart, _CONN_MAGIC, _FRAME_MAGIC, _read, _write,
                    loop_coefficients, spec_from_header, spec_header)

POWERS = (-2, -1, 0, 1, 2)
_GL = (0.5 - np.sqrt(15) / 10, 0.5, 0.5 + np.sqrt(15) / 10)    # Gauss-Legendre nodes on [0, 1]


class RankObstruction(RuntimeError):
    """No abelian subspace of the sigma = -1 space projects onto p' with rank n."""

    def __init__(self, n: int, rank: int, p_rank: int | None = None):
        msg = f"obstructed: n={n} > rank={rank}"
        if p_rank is not None and rank >= n:
            msg = f"obstructed: abelian subspace reaches p'-rank {p_rank} < n={n}"
        super().__init__(msg)
        self.n, self.rank = n, rank


class IntegrabilityError(RuntimeError):
    pass


def _comm(X, Y):
    return X @ Y - Y @ X


def _neg_tau(spec, X):
    return -(spec.Q @ X @ spec.Q)


@dataclass
class MCResidualReport:
    residuals: dict[int, float]
    locations: dict[int, tuple | None]

    def max(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def worst_power(self) -> int:
        return max(self.residuals, key=self.residuals.get)


def mc_coefficients(field: ConnectionField, order: int = 2) -> dict[int, np.ndarray]:
    """Coefficients of d(alpha) + alpha ^ alpha per power of lambda, shape grid + (pairs, m, m)."""
    spec, h = field.spec, field.chart.spacing
    a = field.a
    X = field.b + field.c
    Y = field.c - field.b
    n = field.n
    pairs = list(itertools.combinations(range(n), 2))
    out = {p: [] for p in POWERS}

    def d(arr, i, j):  # d_i arr_j - d_j arr_i
        return fd.diff(arr[..., j, :, :], h[i], i, order) - fd.diff(arr[..., i, :, :], h[j], j, order)

    for i, j in pairs:
        ai, aj, Xi, Xj, Yi, Yj = a[..., i, :, :], a[..., j, :, :], X[..., i, :, :], X[..., j, :, :], \
            Y[..., i, :, :], Y[..., j, :, :]
        out[2].append(_comm(Xi, Xj))
        out[-2].append(_comm(Yi, Yj))
        out[1].append(d(X, i, j) + _comm(ai, Xj) + _comm(Xi, aj))
        out[-1].append(d(Y, i, j) + _comm(ai, Yj) + _comm(Yi, aj))
        out[0].append(d(a, i, j) + _comm(ai, aj) + _comm(Xi, Yj) + _comm(Yi, Xj))
    shape = field.chart.shape + (0, spec.m, spec.m)
    return {p: (np.stack(v, axis=-3) if v else np.zeros(shape)) for p, v in out.items()}


def mc_residual(field: ConnectionField, order: int = 2) -> MCResidualReport:
    """Per-power max (over grid and coordinate pairs) Frobenius norm of the MC coefficients.

    The lambda^2 entry is the curved flat equation [beta_inf_i, beta_inf_j] = 0.
    """
    res, loc = {}, {}
    for p, arr in mc_coefficients(field, order).items():
        if arr.shape[-3] == 0:
            res[p], loc[p] = 0.0, None
            continue
        norms = np.linalg.norm(arr, axis=(-1, -2)).max(axis=-1)
        idx = np.unravel_index(int(np.argmax(norms)), norms.shape)
        res[p], loc[p] = float(norms[idx]), tuple(int(i) for i in idx)
    return MCResidualReport(res, loc)


# ---------------------------------------------------------------------------
# frames

@dataclass
class FrameField:
    chart: GridChart
    spec: SymmetricPairSpec
    lam: float
    F: np.ndarray                   # chart.shape + (m, m)
    axis_order: tuple[int, ...] = ()

    def form_drift(self) -> float:
        """max |F^T S F - S| over the grid (plus J0 commutation and det for su).

        Each point is scaled by max(1, max|F|^2) so boosts of large rapidity
        in the hyperbolic case are judged on relative rounding.
        """
        S = self.spec.S
        scale = np.maximum(1.0, np.abs(self.F).max(axis=(-1, -2)) ** 2)
        drift = (np.abs(np.swapaxes(self.F, -1, -2) @ S @ self.F - S).max(axis=(-1, -2)) / scale).max()
        if self.spec.J0 is not None:
            J0 = self.spec.J0
            drift = max(drift, np.abs(self.F @ J0 - J0 @ self.F).max(), su_det_residual(self))
        return float(drift)

    def inverse(self) -> np.ndarray:
        S = self.spec.S
        return S @ np.swapaxes(self.F, -1, -2) @ S


def su_det_residual(frame: FrameField) -> float:
    """max |det(A + iB) - 1| for F = [[A, -B], [B, A]]."""
    h = frame.spec.m // 2
    A = frame.F[..., :h, :h]
    B = frame.F[..., h:, :h]
    return float(np.abs(np.linalg.det(A + 1j * B) - 1.0).max())


def save_frame(frame: FrameField, path) -> None:
    header = spec_header(frame.spec) | frame.chart.header() | {
        "lambda": frame.lam, "axis_order": list(frame.axis_order)}
    _write(path, _FRAME_MAGIC, header, (frame.F,))


def load_frame(path) -> FrameField:
    h, data = _read(path, _FRAME_MAGIC)
    spec = spec_from_header(h)
    chart = GridChart(tuple(h["shape"]), tuple(h["spacing"]), tuple(h["origin"]))
    F = data.reshape(chart.shape + (spec.m, spec.m)).astype(float)
    return FrameField(chart, spec, h["lambda"], F, tuple(h["axis_order"]))


def _line_alpha(field: ConnectionField, lam: float, axis: int):
    """Callable (coordinate along ``axis``, slab index) -> alpha(d_axis) on that slab."""
    s, t = loop_coefficients(lam)
    chart = field.chart
    if field.sampler is not None:
        pts = chart.points()

        def at(x, slab):
            p = pts[slab].copy()
            p[..., axis] = x
            a, b, c = field.sampler(p)
            return a[..., axis, :, :] + s * b[..., axis, :, :] + t * c[..., axis, :, :]
        return at
    alpha = field.alpha(lam)[..., axis, :, :]
    spline = CubicSpline(chart.axis(axis), alpha, axis=axis)

    def at(x, slab):
        vals = np.expand_dims(spline(x), axis)
        other = list(slab)
        other[axis] = slice(None)
        return vals[tuple(other)]
    return at


def _magnus6(A1, A2, A3, h):
    """Sixth-order Magnus exponent for G' = G A from samples at the three Gauss nodes.

    The usual expansion is for Y' = A Y; transposing swaps the two.
    """
    A1, A2, A3 = (np.swapaxes(x, -1, -2) for x in (A1, A2, A3))
    a1 = h * A2
    a2 = np.sqrt(15) * h / 3 * (A3 - A1)
    a3 = 10 * h / 3 * (A3 - 2 * A2 + A1)
    c1 = _comm(a1, a2)
    c2 = -_comm(a1, 2 * a3 + c1) / 60
    return np.swapaxes(a1 + a3 / 12 + _comm(-20 * a1 - a3 + c1, a2 + c2) / 240, -1, -2)


def integrate_frame(field: ConnectionField, lam: float, order: tuple[int, ...] | None = None,
                    substeps: int = 1, mc_tol: float | None = None,
                    retract: bool = False) -> FrameField:
    """Solve dF = F alpha^lambda from F = I at the grid corner (index 0 on every axis).

    Axes are swept in ``order``: the first axis along the base line, then each
    later axis from every point reached so far.  Sixth-order Magnus steps
    (three Gauss points), ``substeps`` per grid cell; each step multiplies by a
    group element, so the form S is preserved up to rounding.  Off-grid values of alpha come from the
    field's sampler when present, otherwise from cubic splines along the axis.
    """
    lam = float(lam)
    if lam == 0.0:
        raise ValueError("lambda must be nonzero")
    if mc_tol is not None:
        rep = mc_residual(field)
        if rep.max() > mc_tol:
            raise IntegrabilityError(
                f"MC residual {rep.max():.3e} (power {rep.worst_power()}) exceeds {mc_tol:.1e}")
    chart, spec = field.chart, field.spec
    n, m = chart.n, spec.m
    order = tuple(range(n)) if order is None else tuple(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order must be a permutation of 0..{n - 1}")
    F = np.broadcast_to(np.eye(m), chart.shape + (m, m)).copy()
    done: list[int] = []
    for axis in order:
        A = _line_alpha(field, lam, axis)
        x = chart.axis(axis)
        hs = chart.spacing[axis] / substeps
        # slices that are already populated: index 0 on not-yet-swept axes
        sel = [slice(None) if (ax in done or ax == axis) else slice(0, 1) for ax in range(n)]
        for idx in range(chart.shape[axis] - 1):
            cur = list(sel)
            cur[axis] = slice(idx, idx + 1)
            nxt = list(sel)
            nxt[axis] = slice(idx + 1, idx + 2)
            G = F[tuple(cur)]
            for sub in range(substeps):
                x0 = x[idx] + sub * hs
                G = G @ expm(_magnus6(*(A(x0 + c * hs, tuple(cur)) for c in _GL), hs))
            if retract:
                G = _polar_retract(G, spec)
            F[tuple(nxt)] = G
        # broadcast the populated slab along axes not yet swept is unnecessary: they stay at index 0
        done.append(axis)
    return FrameField(chart, spec, lam, F, order)


def closed_form_frame(field: ConnectionField, lam: float, tol: float = 1e-12) -> FrameField:
    """exp(sum_i (x_i - x0_i) alpha_i) for constant, pairwise commuting alpha_i(lambda)."""
    alpha = field.alpha(lam)
    A = alpha[(0,) * field.n]
    if np.abs(alpha - A).max() > tol:
        raise ValueError("closed form needs constant data")
    for i, j in itertools.combinations(range(field.n), 2):
        if np.abs(_comm(A[i], A[j])).max() > tol:
            raise ValueError("closed form needs commuting components")
    chart = field.chart
    dx = chart.points() - np.asarray(chart.origin)
    gen = np.einsum("...i,ikl->...kl", dx, A)
    F = np.stack([expm(g) for g in gen.reshape(-1, field.spec.m, field.spec.m)])
    return FrameField(chart, field.spec, float(lam), F.reshape(gen.shape), tuple(range(field.n)))


def _polar_retract(G, spec):
    # nearest form-preserving matrix via the polar factor of the S-normalized frame (compact only)
    if spec.hyperbolic:
        return G
    u, _, vt = np.linalg.svd(G)
    return u @ vt


def path_independence_residual(field: ConnectionField, lam: float,
                               orders: tuple[tuple[int, ...], tuple[int, ...]] | None = None,
                               **kw) -> float:
    n = field.n
    if orders is None:
        orders = (tuple(range(n)), tuple(reversed(range(n))))
    F1 = integrate_frame(field, lam, orders[0], **kw).F
    F2 = integrate_frame(field, lam, orders[1], **kw).F
    return float(np.abs(F1 - F2).max())


def frame_derivative_audit(frame: FrameField, field: ConnectionField, order: int = 4) -> float:
    """max |F^{-1} d_i F - alpha_i| over the grid (finite-difference pullback)."""
    Finv = frame.inverse()
    alpha = field.alpha(frame.lam)
    worst = 0.0
    for i in range(frame.chart.n):
        dF = fd.diff(frame.F, frame.chart.spacing[i], i, order)
        worst = max(worst, np.abs(Finv @ dF - alpha[..., i, :, :]).max())
    return float(worst)


# ---------------------------------------------------------------------------
# regularity

@dataclass
class RegularityCheck:
    ok: bool
    sigma_min: float
    location: tuple | None


def regularity_check(field: ConnectionField, tol: float = 1e-8) -> RegularityCheck:
    """Smallest singular value of the n coframe vectors c_i (coordinates in p') over the grid."""
    coords = _coords(field.c, field.spec.bases["mm"])         # grid + (n, dim p')
    s = np.linalg.svd(coords, compute_uv=False)[..., -1] if field.n <= coords.shape[-1] else \
        np.zeros(field.chart.shape)
    idx = np.unravel_index(int(np.argmin(s)), s.shape)
    smin = float(s[idx])
    return RegularityCheck(smin > tol, smin, tuple(int(i) for i in idx))


# ---------------------------------------------------------------------------
# generators

def _best_frame_in(basis: np.ndarray, spec: SymmetricPairSpec, n: int, rng, tries: int = 256,
                   wall_margin: bool = False):
    """Orthonormal n-frame of span(basis) maximizing sigma_min of the p'-parts.

    With ``wall_margin`` the score also includes the smallest nonzero singular
    value of the commutant constraint of X_2..X_n, keeping them away from the
    walls where the complementary direction X_1 is ill-determined.
    """
    r = len(basis)
    best, best_s = None, -1.0
    for t in range(tries):
        O = np.eye(r) if t == 0 else np.linalg.qr(rng.standard_normal((r, r)))[0]
        X = np.einsum("ij,jkl->ikl", O[:n], basis)
        s = np.linalg.svd(_coords(project(X, spec, "mm"), spec.bases["mm"]), compute_uv=False)[-1]
        if wall_margin and n > 1:
            sm = np.linalg.svd(_commutant_constraint(spec.minus_basis, X[1:]), compute_uv=False)
            s = min(s, sm[len(spec.minus_basis) - 2] if len(sm) >= len(spec.minus_basis) - 1 else 0.0)
        if s > best_s:
            best, best_s = X, s
    return best, best_s


def _commutant_constraint(B, Xs):
    """Linear map v -> ([sum v_a B_a, X_j], <sum v_a B_a, X_j>) as a matrix (rows, len(B))."""
    Xs = np.asarray(Xs)
    comm = B[:, None] @ Xs[None] - Xs[None] @ B[:, None]          # (a, j, m, m)
    inner = np.einsum("akl,jkl->aj", B, Xs) / 2
    return np.concatenate([comm.reshape(len(B), -1), inner], axis=1).T


def vacuum_solution(spec: SymmetricPairSpec, seed: int = 0, chart: GridChart | None = None,
                    trials: int = 32) -> ConnectionField:
    """Constant abelian data: b_i, c_i from one abelian subspace of the sigma = -1 space, a_i = 0.

    beta_inf components commute, so the lambda^{+-2} and lambda^{+-1} MC
    coefficients vanish and the coframe is regular.  The lambda^0 coefficient
    equals 4 [c_i, c_j]; p' has rank one in both families, so regular
    constant data is never fully MC-flat (see ``commuting_vacuum`` and
    ``local_solution``).  Raises RankObstruction when n exceeds the rank.
    """
    n = spec.n
    rng = np.random.default_rng(seed)
    res = rank_oracle(spec, trials, seed)
    if res.rank < n or res.p_rank < n:
        raise RankObstruction(n, res.rank, res.p_rank)
    X, _ = _best_frame_in(res.basis, spec, n, rng)
    X = X / np.sqrt(np.abs([np.sum(x * x) / 2 for x in X]))[:, None, None]
    chart = chart or GridChart.uniform(n, 9, 0.05)
    return ConnectionField.constant(chart, spec, np.zeros_like(X), project(X, spec, "pm"),
                                    project(X, spec, "mm"))


def commuting_vacuum(spec: SymmetricPairSpec, seed: int = 0, chart: GridChart | None = None) -> ConnectionField:
    """Constant data with alpha_i(lambda) pairwise commuting for every lambda (exactly MC-flat).

    One direction carries a unit p' element c_0; the others carry mutually
    commuting pm elements from the centralizer of c_0.  Degenerate as a
    coframe (rank one), which is forced for constant flat data.
    """
    n, m = spec.n, spec.m
    rng = np.random.default_rng(seed)
    c0 = random_element(spec, "mm", rng)
    c0 /= np.sqrt(np.sum(c0 * c0) / 2)
    chosen = [c0]
    bs = []
    pm = spec.bases["pm"]
    while len(bs) < n - 1:
        C = centralizer(chosen, pm)
        # drop directions already chosen
        for Y in bs:
            C = C - np.einsum("k,ij->kij", np.einsum("kij,ij->k", C, Y) / np.sum(Y * Y), Y)
        if len(C) == 0 or np.abs(C).max() < 1e-9:
            break
        B = np.einsum("k,kij->ij", rng.standard_normal(len(C)), C)
        B /= np.sqrt(np.sum(B * B) / 2)
        bs.append(B)
        chosen.append(B)
    a = np.zeros((n, m, m))
    b = np.zeros((n, m, m))
    c = np.zeros((n, m, m))
    c[0] = c0
    for i, B in enumerate(bs, start=1):
        b[i] = B
    chart = chart or GridChart.uniform(n, 9, 0.05)
    return ConnectionField.constant(chart, spec, a, b, c)


def _pack(mats):
    return np.concatenate([np.asarray(x).ravel() for x in mats])


def _initial_data(spec, rng, mu, a_scale, tries=8):
    """Commuting-loop initial data for directions 2..n at the start point."""
    n, m = spec.n, spec.m
    res = rank_oracle(spec, 32, int(rng.integers(1 << 30)))
    if res.rank < n or res.p_rank < n:
        raise RankObstruction(n, res.rank, res.p_rank)
    X0, _ = _best_frame_in(res.basis, spec, n, rng, wall_margin=True)
    X0 = mu * X0
    pp = spec.bases["pp"]
    if n == 2 or len(pp) == 0:
        a = [a_scale * random_element(spec, "pp", rng) / np.sqrt(max(len(pp), 1)) for _ in range(n - 1)] \
            if len(pp) else [np.zeros((m, m))] * (n - 1)
        return X0, a
    Bm = spec.minus_basis
    best = None
    for _ in range(tries):
        x0 = np.concatenate([_coords(X0[1:], Bm).ravel(),
                             a_scale * rng.standard_normal((n - 1) * len(pp))])
        nx = (n - 1) * len(Bm)

        def unpack(z):
            Xs = np.einsum("ja,akl->jkl", z[:nx].reshape(n - 1, -1), Bm)
            As = np.einsum("ja,akl->jkl", z[nx:].reshape(n - 1, -1), pp)
            return Xs, As

        def resid(z):
            Xs, As = unpack(z)
            out = []
            for i, j in itertools.combinations(range(n - 1), 2):
                ci, cj = project(Xs[i], spec, "mm"), project(Xs[j], spec, "mm")
                out += [_comm(Xs[i], Xs[j]), _comm(As[i], Xs[j]) - _comm(As[j], Xs[i]),
                        _comm(As[i], As[j]) + 4 * _comm(ci, cj)]
            gram = np.einsum("ikl,jkl->ij", Xs, Xs) / 2 - mu ** 2 * np.eye(n - 1)
            return np.concatenate([_pack(out), gram.ravel()])

        sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
        r = np.abs(resid(sol.x)).max()
        if best is None or r < best[0]:
            best = (r, unpack(sol.x))
        if r < 1e-13:
            break
    if best[0] > 1e-12:
        raise RuntimeError(f"could not solve the commuting-loop initial conditions (residual {best[0]:.2e})")
    Xs, As = best[1]
    return np.concatenate([X0[:1], Xs]), list(As)


class _LocalSystem:
    """ODE in x_1 for data invariant under translations in x_2..x_n, gauge a_1 = 0.

    State: X_1, then a_j and X_j (j >= 2), with X = b + c.  X_j' = [a_j, X_1],
    a_j' = [X_j, Y_1] + [Y_j, X_1] (Y = c - b), and X_1 follows the unit
    null vector of the linear constraints [X_1, X_j] = 0, <X_1, X_j> = 0.
    """

    def __init__(self, spec):
        self.spec = spec
        self.B = spec.minus_basis
        self.n, self.m = spec.n, spec.m

    def unpack(self, y):
        Z = y.reshape(-1, self.m, self.m)
        k = self.n - 1
        return Z[0], Z[1:1 + k], Z[1 + k:]

    def pack(self, X1, a, X):
        return _pack([X1, *a, *X])

    def _constraint(self, Xs):
        return _commutant_constraint(self.B, Xs)

    def rhs(self, t, y):
        spec = self.spec
        X1, a, X = self.unpack(y)
        Y1 = _neg_tau(spec, X1)
        da = [_comm(Xj, Y1) + _comm(_neg_tau(spec, Xj), X1) for Xj in X]
        dX = [_comm(aj, X1) for aj in a]
        M = self._constraint(X)
        Mp = self._constraint(dX)
        v = _coords(X1, self.B)
        dv = -np.linalg.pinv(M, rcond=1e-10) @ (Mp @ v)
        dX1 = np.einsum("a,aij->ij", dv, self.B)
        return self.pack(dX1, da, dX)

    def triples(self, y):
        """(a, b, c) with shape (..., n, m, m) from states (..., size)."""
        spec = self.spec
        Z = y.reshape(y.shape[:-1] + (-1, self.m, self.m))
        k = self.n - 1
        X = np.concatenate([Z[..., :1, :, :], Z[..., 1 + k:, :, :]], axis=-3)
        a = np.concatenate([np.zeros_like(Z[..., :1, :, :]), Z[..., 1:1 + k, :, :]], axis=-3)
        QXQ = spec.Q @ X @ spec.Q
        return a, (X + QXQ) / 2, (X - QXQ) / 2


def local_solution(spec: SymmetricPairSpec, chart: GridChart | None = None, seed: int = 0,
                   mu: float = 0.3, a_scale: float | None = None, rtol: float = 1e-13,
                   candidates: int = 16, attempts: int = 6) -> ConnectionField:
    """Non-constant MC-flat data depending on x_1 only, built by ODE integration.

    Exists exactly when n <= rank (RankObstruction otherwise).  Initial data
    at the centre of axis 0 are mutually commuting loops in directions 2..n
    and X_1 spanning the rest of their commutant.  ``a_scale`` sets the
    initial a_2 for n = 2 (default 0) and the starting guess for the
    commuting-loop solve when n >= 3 (default 0.3).

    For n >= 3, ``candidates`` starts are drawn and ranked by how well
    conditioned their coframe is; up to ``attempts`` of them are integrated
    and the first whose coframe margin stays above 0.2 mu along axis 0
    (checked at 4x the grid resolution) is kept, else the best seen.
    The returned field carries a dense-output sampler for off-grid evaluation.
    """
    n = spec.n
    chart = chart or GridChart.uniform(n, 65 if n == 2 else 33, 0.05)
    if chart.n != n:
        raise ValueError(f"chart dimension {chart.n} != n = {n}")
    if a_scale is None:
        a_scale = 0.0 if n == 2 else 0.3
    rng = np.random.default_rng(seed)
    sys_ = _LocalSystem(spec)
    starts = _start_states(sys_, rng, mu, a_scale, candidates if n > 2 else 1)
    xs = chart.axis(0)
    line = np.zeros((4 * (len(xs) - 1) + 1, n))
    line[:, 0] = np.linspace(xs[0], xs[-1], len(line))
    best = None
    for y0 in starts[:attempts]:
        try:
            with np.errstate(over="raise", invalid="raise"):
                sampler = _solve_local(sys_, y0, chart, rtol)
                _, _, c = sampler(line)
        except (RuntimeError, FloatingPointError, np.linalg.LinAlgError):
            continue  # this start runs into a singular constraint
        margin = np.linalg.svd(_coords(c, spec.bases["mm"]), compute_uv=False)[..., -1].min()
        if best is None or margin > best[0]:
            best = (margin, sampler)
        if margin >= 0.2 * mu:
            break
    if best is None:
        raise IntegrabilityError(f"no regular local solution found in {attempts} attempts")
    sampler = best[1]
    a_, b_, c_ = sampler(chart.points())
    return ConnectionField(chart, spec, a_, b_, c_, sampler=sampler)


def _start_states(sys_, rng, mu, a_scale, count):
    """Initial ODE states, best-conditioned coframe first."""
    spec = sys_.spec
    scored = []
    for _ in range(count):
        X, a = _initial_data(spec, rng, mu, a_scale)
        # X_1 from the constraint null space, so it is consistent to rounding
        _, _, vt = np.linalg.svd(sys_._constraint(X[1:]))
        X1 = np.einsum("a,aij->ij", vt[-1], sys_.B)
        X1 *= mu / np.sqrt(np.sum(X1 * X1) / 2)
        if np.sum(X1 * X[0]) < 0:
            X1 = -X1
        c = project(np.concatenate([X1[None], X[1:]]), spec, "mm")
        score = np.linalg.svd(_coords(c, spec.bases["mm"]), compute_uv=False)[-1]
        scored.append((-score, len(scored), sys_.pack(X1, a, X[1:])))
    scored.sort(key=lambda t: t[:2])
    return [y for *_, y in scored]


def _solve_local(sys_, y0, chart, rtol):
    xs = chart.axis(0)
    x0 = 0.5 * (xs[0] + xs[-1])
    kw = dict(method="DOP853", rtol=rtol, atol=rtol * 1e-1, dense_output=True)
    fwd = solve_ivp(sys_.rhs, (x0, xs[-1] + chart.spacing[0]), y0, **kw)
    bwd = solve_ivp(sys_.rhs, (x0, xs[0] - chart.spacing[0]), y0, **kw)
    if not (fwd.success and bwd.success):
        raise RuntimeError("ODE integration failed")

    def state(x1):
        x1 = np.asarray(x1, dtype=float)
        flat, inv = np.unique(x1.ravel(), return_inverse=True)
        out = np.empty((flat.size, y0.size))
        hi = flat >= x0
        if hi.any():
            out[hi] = fwd.sol(flat[hi]).T
        if (~hi).any():
            out[~hi] = bwd.sol(flat[~hi]).T
        return out[inv].reshape(x1.shape + (y0.size,))

    def sampler(points):
        return sys_.triples(state(np.asarray(points)[..., 0]))

    return sampler
