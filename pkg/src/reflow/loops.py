"""Laurent-polynomial loop data: twistedness, real-lambda evaluation, grid connections.

Container format (version 1), used for both connection and frame dumps::

    REFLOW-CONNECTION 1\\n   (or REFLOW-FRAME 1\\n)
    <header: one line of compact JSON, sorted keys>\\n
    <payload: little-endian float64, C order>

Connection payload is the arrays ``a``, ``b``, ``c`` in that order, each of
shape ``grid_shape + (n, m, m)``.  Frame payload is ``F`` of shape
``grid_shape + (m, m)``.  The header records family, n, k, m, signature,
curvature_scale, shape, spacing and origin (frames also record lambda).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .liecore import Family, SymmetricPairSpec, build_lagrangian_pair, build_space_form_pair, project

FORMAT_VERSION = 1
_CONN_MAGIC = b"REFLOW-CONNECTION"
_FRAME_MAGIC = b"REFLOW-FRAME"


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if lam == 0.0 or not np.isfinite(lam):
        raise ValueError("lambda must be a nonzero real number")
    return lam


def r_lambda(lam: float) -> float:
    """Homothety factor |(lambda + 1/lambda) / 2|."""
    lam = _check_lambda(lam)
    return abs(lam + 1.0 / lam) / 2.0


def loop_coefficients(lam: float) -> tuple[float, float]:
    """(lambda - 1/lambda, lambda + 1/lambda), multiplying the pm and mm parts."""
    lam = _check_lambda(lam)
    return lam - 1.0 / lam, lam + 1.0 / lam


@dataclass
class LaurentMatrixPoly:
    """sum_j coeffs[j + degree] * lambda**j for j = -degree..degree."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 3 or self.coeffs.shape[0] % 2 != 1:
            raise ValueError("coeffs must have shape (2d+1, m, m)")

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] // 2

    def coefficient(self, j: int) -> np.ndarray:
        return self.coeffs[j + self.degree]

    @classmethod
    def from_dict(cls, terms: dict[int, np.ndarray], m: int | None = None) -> "LaurentMatrixPoly":
        d = max((abs(j) for j in terms), default=0)
        if m is None:
            m = next(iter(terms.values())).shape[0]
        coeffs = np.zeros((2 * d + 1, m, m))
        for j, A in terms.items():
            coeffs[j + d] = A
        return cls(coeffs)

    @classmethod
    def from_triple(cls, a, b, c) -> "LaurentMatrixPoly":
        """a + b (lambda - 1/lambda) + c (lambda + 1/lambda)."""
        return cls(np.array([c - b, a, b + c]))

    def __call__(self, lam: float) -> np.ndarray:
        return evaluate(self, lam)


def evaluate(p: LaurentMatrixPoly, lam: float) -> np.ndarray:
    lam = _check_lambda(lam)
    d = p.degree
    powers = lam ** np.arange(-d, d + 1, dtype=float)
    return np.tensordot(powers, p.coeffs, axes=1)


def is_twisted(p: LaurentMatrixPoly, spec: SymmetricPairSpec, tol: float = 1e-10) -> tuple[bool, float]:
    """Check sigma(A_j) = (-1)^j A_j and (-1)^j tau(A_j) = A_{-j}; coefficients are real by storage."""
    worst = 0.0
    for j in range(-p.degree, p.degree + 1):
        A = p.coefficient(j)
        sign = -1.0 if j % 2 else 1.0
        worst = max(worst,
                    np.abs(spec.sigma(A) - sign * A).max(initial=0.0),
                    np.abs(sign * spec.tau(A) - p.coefficient(-j)).max(initial=0.0))
    return worst <= tol, float(worst)


@dataclass(frozen=True)
class GridChart:
    """Uniform box grid; axis i has ``shape[i]`` points from ``origin[i]`` with step ``spacing[i]``."""

    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        spacing = tuple(float(h) for h in self.spacing)
        origin = tuple(float(o) for o in self.origin) if self.origin is not None else (0.0,) * len(shape)
        if len(spacing) != len(shape) or len(origin) != len(shape):
            raise ValueError("shape, spacing and origin must have equal length")
        if any(s < 3 for s in shape):
            raise ValueError(f"every axis needs at least 3 points, got {shape}")
        if any(h <= 0 for h in spacing):
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def uniform(cls, n: int, points: int, h: float, centered: bool = True) -> "GridChart":
        o = -(points - 1) * h / 2 if centered else 0.0
        return cls((points,) * n, (h,) * n, (o,) * n)

    @property
    def n(self) -> int:
        return len(self.shape)

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.shape[i])

    def points(self) -> np.ndarray:
        """Coordinates with shape ``shape + (n,)``."""
        return np.stack(np.meshgrid(*(self.axis(i) for i in range(self.n)), indexing="ij"), axis=-1)

    def header(self) -> dict:
        return {"shape": list(self.shape), "spacing": list(self.spacing), "origin": list(self.origin)}


Sampler = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass
class ConnectionField:
    """Coefficient triples (a_i, b_i, c_i) per grid point and direction.

    Arrays have shape ``chart.shape + (n, m, m)``.  ``sampler``, when set,
    evaluates the same triples at arbitrary points ``(..., n)`` and is used by
    the frame integrator in place of grid interpolation.
    """

    chart: GridChart
    spec: SymmetricPairSpec
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    sampler: Sampler | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        want = self.chart.shape + (self.chart.n, self.spec.m, self.spec.m)
        for name in ("a", "b", "c"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected {want}")
            setattr(self, name, arr)

    @property
    def n(self) -> int:
        return self.chart.n

    def alpha(self, lam: float) -> np.ndarray:
        s, t = loop_coefficients(lam)
        return self.a + s * self.b + t * self.c

    def beta(self, lam: float) -> np.ndarray:
        s, t = loop_coefficients(lam)
        return s * self.b + t * self.c

    def beta_inf(self) -> np.ndarray:
        return self.b + self.c

    def poly(self, index: tuple[int, ...], direction: int) -> LaurentMatrixPoly:
        return LaurentMatrixPoly.from_triple(self.a[index][direction], self.b[index][direction],
                                             self.c[index][direction])

    def replace(self, **kw) -> "ConnectionField":
        args = dict(chart=self.chart, spec=self.spec, a=self.a, b=self.b, c=self.c, sampler=self.sampler)
        args.update(kw)
        return ConnectionField(**args)

    @classmethod
    def constant(cls, chart: GridChart, spec: SymmetricPairSpec, a, b, c) -> "ConnectionField":
        """Same (a_i, b_i, c_i) at every grid point; inputs have shape (n, m, m)."""
        full = chart.shape + (chart.n, spec.m, spec.m)
        a, b, c = (np.broadcast_to(np.asarray(x, dtype=float), full).copy() for x in (a, b, c))

        def sampler(x):
            lead = np.shape(x)[:-1] + (chart.n, spec.m, spec.m)
            return tuple(np.broadcast_to(arr[(0,) * chart.n], lead) for arr in (a, b, c))

        return cls(chart, spec, a, b, c, sampler=sampler)


@dataclass
class DegreeCheck:
    ok: bool
    residual: float
    location: tuple | None
    component: str | None


def connection_degree_check(field: ConnectionField, spec: SymmetricPairSpec | None = None,
                            tol: float = 1e-10) -> DegreeCheck:
    """Membership of a, b, c in the pp, pm, mm spaces at every grid point."""
    spec = spec or field.spec
    worst, where, comp = 0.0, None, None
    for name, arr, target in (("a", field.a, "pp"), ("b", field.b, "pm"), ("c", field.c, "mm")):
        off = np.abs(arr - project(arr, spec, target)).max(axis=(-1, -2))
        skew = np.abs(np.swapaxes(arr, -1, -2) @ spec.S + spec.S @ arr).max(axis=(-1, -2))
        err = np.maximum(off, skew).max(axis=-1)
        idx = np.unravel_index(int(np.argmax(err)), err.shape)
        if err[idx] > worst:
            worst, where, comp = float(err[idx]), tuple(int(i) for i in idx), name
    return DegreeCheck(worst <= tol, worst, where, comp)


# ---------------------------------------------------------------------------
# container I/O

def spec_header(spec: SymmetricPairSpec) -> dict:
    return {"family": spec.family.value, "n": spec.n, "k": spec.k, "m": spec.m,
            "signature": [int(s) for s in spec.signature],
            "curvature_scale": float(spec.curvature_scale)}


def spec_from_header(h: dict) -> SymmetricPairSpec:
    hyp = any(s < 0 for s in h["signature"])
    if h["family"] == Family.SPACE_FORM.value:
        spec = build_space_form_pair(h["n"], h["k"], hyp)
    elif h["family"] == Family.LAGRANGIAN.value:
        spec = build_lagrangian_pair(h["n"], hyp)
    else:
        raise ValueError(f"unknown family {h['family']!r}")
    if list(spec.signature.astype(int)) != list(h["signature"]) or spec.m != h["m"]:
        raise ValueError("header signature does not match the family")
    return spec.with_scale(h["curvature_scale"])


def _write(path, magic, header, arrays):
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(magic + b" %d\n" % FORMAT_VERSION)
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n")
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read(path, magic):
    with open(path, "rb") as fh:
        first = fh.readline().split()
        if len(first) != 2 or first[0] != magic:
            raise ValueError(f"{path}: not a {magic.decode()} container")
        if int(first[1]) != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported container version {first[1].decode()}")
        header = json.loads(fh.readline())
        payload = np.frombuffer(fh.read(), dtype="<f8")
    return header, payload


def save_connection(field: ConnectionField, path) -> None:
    header = spec_header(field.spec) | field.chart.header()
    _write(path, _CONN_MAGIC, header, (field.a, field.b, field.c))


def load_connection(path) -> ConnectionField:
    h, data = _read(path, _CONN_MAGIC)
    spec = spec_from_header(h)
    chart = GridChart(tuple(h["shape"]), tuple(h["spacing"]), tuple(h["origin"]))
    shape = chart.shape + (chart.n, spec.m, spec.m)
    size = int(np.prod(shape))
    if data.size != 3 * size:
        raise ValueError(f"{path}: payload has {data.size} values, expected {3 * size}")
    a, b, c = (data[i * size:(i + 1) * size].reshape(shape).astype(float) for i in range(3))
    return ConnectionField(chart, spec, a, b, c)
