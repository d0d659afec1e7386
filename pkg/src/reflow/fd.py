"""Finite-difference stencils on uniform grids and metric curvature."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

ORDERS = (2, 4, 6)


@lru_cache(maxsize=None)
def stencil(offsets: tuple[int, ...], deriv: int) -> np.ndarray:
    """Weights w with sum_k w_k f(x + offsets_k h) ~ h^deriv f^(deriv)(x)."""
    p = np.asarray(offsets, dtype=float)
    V = np.vander(p, increasing=True).T
    rhs = np.zeros(len(p))
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(V, rhs)


def _check(order, N):
    if order not in ORDERS:
        raise ValueError(f"unsupported stencil order {order}")
    if N < order + 1:
        raise ValueError(f"order-{order} stencil needs at least {order + 1} points per axis")


def diff(f: np.ndarray, h: float, axis: int, order: int = 2) -> np.ndarray:
    """First derivative along ``axis``; central inside, one-sided at the edges."""
    if order == 2:
        return np.gradient(f, h, axis=axis, edge_order=2)
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    N = f.shape[0]
    _check(order, N)
    r = order // 2
    w = stencil(tuple(range(-r, r + 1)), 1)
    out = np.empty_like(f)
    # antisymmetric pairing so constant fields differentiate to exactly zero
    out[r:N - r] = sum(w[r + k] * (f[r + k:N - r + k] - f[r - k:N - r - k]) for k in range(1, r + 1))
    for row in range(r):
        we = stencil(tuple(range(-row, order + 1 - row)), 1)
        out[row] = np.tensordot(we, f[:order + 1], axes=1)
        out[N - 1 - row] = -np.tensordot(we, f[::-1][:order + 1], axes=1)
    return np.moveaxis(out / h, 0, axis)


def second_diff(f: np.ndarray, h: tuple, i: int, j: int, order: int = 2) -> np.ndarray:
    """Mixed or pure second derivative; pure ones use a direct central stencil (NaN at the edges)."""
    if i != j:
        return diff(diff(f, h[i], i, order), h[j], j, order)
    f = np.moveaxis(np.asarray(f, dtype=float), i, 0)
    N = f.shape[0]
    _check(order, N)
    r = order // 2
    w = stencil(tuple(range(-r, r + 1)), 2)
    out = np.full_like(f, np.nan)
    out[r:N - r] = sum(wk * f[k:N - 2 * r + k] for k, wk in enumerate(w)) / h[i] ** 2
    return np.moveaxis(out, 0, i)


def interior(order: int = 2) -> int:
    """Number of boundary layers where pure second differences are undefined."""
    return order // 2


def christoffel(g: np.ndarray, h: tuple, order: int = 2) -> np.ndarray:
    """Gamma[..., k, i, j] for a metric field g[..., i, j] over an n-dim grid."""
    n = g.shape[-1]
    dg = np.stack([diff(g, h[l], l, order) for l in range(n)], axis=-3)  # [..., l, i, j]
    # lower-index Gamma_{l,ij} = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    low = 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    return np.einsum("...kl,...lij->...kij", np.linalg.inv(g), low)


def sectional_curvatures(g: np.ndarray, h: tuple, order: int = 2) -> dict[tuple[int, int], np.ndarray]:
    """Sectional curvature of every coordinate 2-plane, as grid fields."""
    n = g.shape[-1]
    G = christoffel(g, h, order)
    dG = np.stack([diff(G, h[l], l, order) for l in range(n)], axis=-4)  # [..., l, k, i, j]
    out = {}
    for i in range(n):
        for j in range(i + 1, n):
            # R^a_{jij} with convention R(X,Y)Z; K = g(R(e_i,e_j)e_j, e_i) / |e_i ^ e_j|^2
            Ra = (dG[..., i, :, j, j] - dG[..., j, :, i, j]
                  + np.einsum("...am,...m->...a", G[..., :, i, :], G[..., :, j, j])
                  - np.einsum("...am,...m->...a", G[..., :, j, :], G[..., :, i, j]))
            num = np.einsum("...a,...a->...", g[..., i, :], Ra)
            den = g[..., i, i] * g[..., j, j] - g[..., i, j] ** 2
            out[(i, j)] = num / den
    return out
