"""Finite-difference calculus on the sphere.

Two backends:

``full_s2``
    Latitude-longitude grid on S^2 with staggered colatitudes
    ``theta_j = (j + 1/2) pi / n_theta`` (no node on a pole) and periodic
    longitudes.  Stencils that step over a pole continue along the great
    circle, i.e. row ``-1`` at longitude ``phi`` is row ``0`` at ``phi + pi``.

``axisym``
    Functions of the colatitude only on S^n, ``theta_j = j pi / n_theta``
    including both poles, with reflective ends ``u'(0) = u'(pi) = 0``.  The
    frame Hessian is ``diag(u'', t, ..., t)`` with ``t = cot(theta) u'``
    (n - 1 copies) and ``t = u''`` at the poles.

All derivative operators are sparse matrices acting on the flattened node
vector, so residuals and their linearisations share one discretisation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lambda_op import pk_margin

__all__ = [
    "SphereGrid",
    "SolutionField",
    "axisym_grid",
    "full_s2_grid",
    "make_grid",
    "gradient",
    "covariant_hessian",
    "laplace_beltrami",
    "spectrum_field",
]

MIN_RESOLUTION = 8


@dataclass(frozen=True, eq=False)
class SphereGrid:
    backend: str
    resolution: tuple
    n: int
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    spacing: float
    grad_ops: tuple
    hess_ops: dict = field(repr=False)

    @property
    def size(self) -> int:
        return self.theta.size

    def evaluate(self, fn):
        """Sample ``fn(theta, phi)`` at the nodes."""
        vals = np.asarray(fn(self.theta, self.phi), dtype=float)
        return np.broadcast_to(vals, self.theta.shape).copy()

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _csr(rows, cols, vals, size):
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def axisym_grid(n_theta: int, dim: int = 2) -> SphereGrid:
    """Axisymmetric grid on S^dim with ``n_theta`` intervals in colatitude."""
    n_theta, dim = int(n_theta), int(dim)
    if n_theta < MIN_RESOLUTION:
        raise ValueError(f"axisym resolution {n_theta} < {MIN_RESOLUTION}")
    if dim < 2:
        raise ValueError("sphere dimension must be at least 2")
    M = n_theta + 1
    h = np.pi / n_theta
    theta = np.arange(M) * h
    idx = np.arange(1, M - 1)

    d1 = sp.lil_matrix((M, M))
    d1[idx, idx + 1] = 0.5 / h
    d1[idx, idx - 1] = -0.5 / h
    d1 = d1.tocsr()

    d2 = sp.lil_matrix((M, M))
    d2[idx, idx + 1] = 1.0 / h**2
    d2[idx, idx - 1] = 1.0 / h**2
    d2[idx, idx] = -2.0 / h**2
    d2[0, 0], d2[0, 1] = -2.0 / h**2, 2.0 / h**2
    d2[M - 1, M - 1], d2[M - 1, M - 2] = -2.0 / h**2, 2.0 / h**2
    d2 = d2.tocsr()

    cot = np.zeros(M)
    cot[idx] = 1.0 / np.tan(theta[idx])
    pole = np.zeros(M)
    pole[[0, M - 1]] = 1.0
    tangential = (sp.diags(cot) @ d1 + sp.diags(pole) @ d2).tocsr()

    weights = np.sin(theta) ** (dim - 1) * h
    weights[[0, M - 1]] *= 0.5
    hess_ops = {(0, 0): d2}
    for i in range(1, dim):
        hess_ops[(i, i)] = tangential
    grad_ops = (d1,) + (None,) * (dim - 1)
    return SphereGrid("axisym", (n_theta,), dim, theta, np.zeros(M), weights, h,
                      grad_ops, hess_ops)


def full_s2_grid(n_theta: int, n_phi: int | None = None) -> SphereGrid:
    """Pole-free latitude-longitude grid on S^2 (``n_phi`` must be even)."""
    n_theta = int(n_theta)
    n_phi = 2 * n_theta if n_phi is None else int(n_phi)
    if min(n_theta, n_phi) < MIN_RESOLUTION:
        raise ValueError(f"full_s2 resolution {(n_theta, n_phi)} has a side < {MIN_RESOLUTION}")
    if n_phi % 2:
        raise ValueError("n_phi must be even for cross-pole reflection")
    dth, dph = np.pi / n_theta, 2 * np.pi / n_phi
    th1 = (np.arange(n_theta) + 0.5) * dth
    ph1 = np.arange(n_phi) * dph
    TH, PH = np.meshgrid(th1, ph1, indexing="ij")
    theta, phi = TH.ravel(), PH.ravel()
    size = theta.size
    J, Mi = np.meshgrid(np.arange(n_theta), np.arange(n_phi), indexing="ij")
    J, Mi = J.ravel(), Mi.ravel()

    def node(j, m):
        # continue through a pole along the great circle
        m = np.where((j < 0) | (j >= n_theta), m + n_phi // 2, m)
        j = np.where(j < 0, -1 - j, np.where(j >= n_theta, 2 * n_theta - 1 - j, j))
        return j * n_phi + np.mod(m, n_phi)

    me = node(J, Mi)
    north, south = node(J - 1, Mi), node(J + 1, Mi)
    east, west = node(J, Mi + 1), node(J, Mi - 1)
    ones = np.ones(size)

    dt = _csr(np.r_[me, me], np.r_[south, north], np.r_[ones, -ones] / (2 * dth), size)
    dtt = _csr(np.r_[me, me, me], np.r_[south, north, me],
               np.r_[ones, ones, -2 * ones] / dth**2, size)
    dp = _csr(np.r_[me, me], np.r_[east, west], np.r_[ones, -ones] / (2 * dph), size)
    dpp = _csr(np.r_[me, me, me], np.r_[east, west, me],
               np.r_[ones, ones, -2 * ones] / dph**2, size)
    corners = [node(J + 1, Mi + 1), node(J + 1, Mi - 1), node(J - 1, Mi + 1), node(J - 1, Mi - 1)]
    dtp = _csr(np.tile(me, 4), np.concatenate(corners),
               np.r_[ones, -ones, -ones, ones] / (4 * dth * dph), size)

    inv_sin = sp.diags(1.0 / np.sin(theta))
    cot = sp.diags(1.0 / np.tan(theta))
    hess_ops = {
        (0, 0): dtt,
        (0, 1): (inv_sin @ (dtp - cot @ dp)).tocsr(),
        (1, 1): (inv_sin @ inv_sin @ dpp + cot @ dt).tocsr(),
    }
    grad_ops = (dt, (inv_sin @ dp).tocsr())
    weights = np.sin(theta) * dth * dph
    return SphereGrid("full_s2", (n_theta, n_phi), 2, theta, phi, weights,
                      max(dth, dph), grad_ops, hess_ops)


def make_grid(backend: str, resolution, dim: int = 2) -> SphereGrid:
    res = np.atleast_1d(resolution).astype(int).tolist()
    if backend == "axisym":
        if len(res) != 1:
            raise ValueError("axisym grids take a single resolution")
        return axisym_grid(res[0], dim)
    if backend == "full_s2":
        if dim != 2:
            raise ValueError("the full grid backend covers S^2 only; use axisym for n >= 3")
        return full_s2_grid(*res[:2])
    raise ValueError(f"unknown grid backend {backend!r}")


def gradient(u, grid: SphereGrid) -> np.ndarray:
    """Frame components of the gradient, shape (nodes, n)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros((grid.size, grid.n))
    for i, op in enumerate(grid.grad_ops):
        if op is not None:
            out[:, i] = op @ u
    return out


def covariant_hessian(u, grid: SphereGrid) -> np.ndarray:
    """Frame Hessian ``nabla^2 u``, shape (nodes, n, n)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise ValueError(f"expected {grid.size} node values, got shape {u.shape}")
    out = np.zeros((grid.size, grid.n, grid.n))
    cache = {}
    for (i, j), op in grid.hess_ops.items():
        key = id(op)
        if key not in cache:
            cache[key] = op @ u
        out[:, i, j] = cache[key]
        out[:, j, i] = cache[key]
    return out


def laplace_beltrami(u, grid: SphereGrid) -> np.ndarray:
    """Flux-form Laplace-Beltrami operator (independent of the frame Hessian)."""
    u = np.asarray(u, dtype=float)
    if grid.backend == "axisym":
        h, n = grid.spacing, grid.n
        th = grid.theta
        half = np.sin(th[:-1] + 0.5 * h) ** (n - 1)
        flux = half * np.diff(u) / h
        out = np.empty_like(u)
        # exact cell volumes keep the scheme second order next to the poles
        x, w = np.polynomial.legendre.leggauss(8)
        pts = th[1:-1, None] + 0.5 * h * x
        vol = 0.5 * h * (np.sin(pts) ** (n - 1)) @ w
        out[1:-1] = np.diff(flux) / vol
        out[0] = n * 2 * (u[1] - u[0]) / h**2
        out[-1] = n * 2 * (u[-2] - u[-1]) / h**2
        return out
    n_theta, n_phi = grid.resolution
    dth, dph = np.pi / n_theta, 2 * np.pi / n_phi
    U = u.reshape(n_theta, n_phi)
    rolled = np.roll(U, n_phi // 2, axis=1)
    ext = np.vstack([rolled[:1], U, rolled[-1:]])
    th_half = np.arange(n_theta + 1) * dth
    s_half = np.sin(th_half)[:, None]
    flux = s_half * np.diff(ext, axis=0) / dth
    th = ((np.arange(n_theta) + 0.5) * dth)[:, None]
    lap = np.diff(flux, axis=0) / (dth * np.sin(th))
    lap += (np.roll(U, -1, axis=1) - 2 * U + np.roll(U, 1, axis=1)) / (dph**2 * np.sin(th) ** 2)
    return lap.ravel()


@dataclass(eq=False)
class SolutionField:
    """Node values of u with cached derivatives and the spectrum of ``nabla^2 u + u I``."""

    grid: SphereGrid
    u: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    spectrum: np.ndarray
    margin: np.ndarray
    residual: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def a(self) -> np.ndarray:
        return self.hess + self.u[:, None, None] * np.eye(self.grid.n)

    @property
    def min_eig(self) -> float:
        return float(self.spectrum[:, 0].min())

    def to_csv(self, path) -> None:
        """Write columns theta, phi, u, lambda_1..lambda_n, margin, residual."""
        n = self.grid.n
        header = ["theta", "phi", "u"] + [f"lambda_{i + 1}" for i in range(n)] + ["margin", "residual"]
        res = self.residual if self.residual is not None else np.full(self.grid.size, np.nan)
        cols = np.column_stack([self.grid.theta, self.grid.phi, self.u, self.spectrum, self.margin, res])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in cols:
                writer.writerow([format(x, ".17g") for x in row])


def spectrum_field(u, grid: SphereGrid, spec, residual=None) -> SolutionField:
    """Populate derivatives, sorted spectra and (P, k)-cone margins for ``u > 0``.

    ``spec`` is anything with ``P`` and ``k`` attributes.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise ValueError(f"expected {grid.size} node values, got shape {u.shape}")
    if np.any(u <= 0):
        bad = int(np.flatnonzero(u <= 0)[0])
        raise ValueError(f"u must be positive; node {bad} has u={u[bad]:.6g}")
    hess = covariant_hessian(u, grid)
    a = hess + u[:, None, None] * np.eye(grid.n)
    lam = np.linalg.eigvalsh(a)
    margin = np.asarray(pk_margin(lam, spec.P, spec.k))
    return SolutionField(grid, u.copy(), gradient(u, grid), hess, lam, margin, residual)
