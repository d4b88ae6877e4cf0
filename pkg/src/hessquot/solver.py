"""Residual, linearisation, damped Newton and continuation for the equation

    sigma_k(Lambda(a)) / sigma_l(Lambda(a)) = u^{p-1} (u^2 + |grad u|^2)^{(k+1-q)/2} phi,
    a = nabla^2 u + u I,

on a :class:`~hessquot.sphere.SphereGrid`.

Newton works with the normalised form
``F~(a) - (u^{p-1} (u^2+|grad u|^2)^{(k+1-q)/2} phi)^{1/(k-l)}`` whose
linearisation is :func:`linearize`; the raw form is what gets reported.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lambda_op import operator_grad, operator_value, pk_margin
from .problem import ProblemSpec
from .sphere import SolutionField, SphereGrid, covariant_hessian, gradient, spectrum_field

__all__ = [
    "ProblemSpec",
    "HomotopyState",
    "HomogeneousResult",
    "SolverError",
    "AdmissibilityError",
    "LineSearchError",
    "LinearSolveError",
    "ContinuationError",
    "GammaError",
    "DEFAULT_EPS",
    "homotopy_phi",
    "residual",
    "linearize",
    "newton_solve",
    "continuation",
    "homogeneous_solve",
    "write_trace",
]

log = logging.getLogger(__name__)

DEFAULT_EPS = (0.5, 0.25, 0.1, 0.05, 0.02)


class SolverError(RuntimeError):
    pass


class AdmissibilityError(ValueError):
    """A node left the (P, k)-cone, or u stopped being positive."""

    def __init__(self, node, margin, message=None):
        self.node = int(node)
        self.margin = float(margin)
        super().__init__(message or f"inadmissible at node {self.node}: cone margin {self.margin:.3e}")


class LineSearchError(SolverError):
    pass


class LinearSolveError(SolverError):
    pass


class ContinuationError(SolverError):
    def __init__(self, message, last_t, states):
        self.last_t = last_t
        self.states = states
        super().__init__(f"{message} (last good t = {last_t:.6g})")


class GammaError(SolverError):
    def __init__(self, gammas):
        self.gammas = list(gammas)
        super().__init__(f"gamma_eps sequence is not Cauchy: {self.gammas}")


def homotopy_phi(spec: ProblemSpec, t: float, p: float | None = None):
    """The continuity path from the constant ``c0`` (t = 0) to ``spec.phi`` (t = 1)."""
    if spec.phi is None:
        raise ValueError("the problem has no phi")
    p = spec.p if p is None else p
    m = spec.k - spec.l + p - 1
    return ((1 - t) * spec.c0 ** (-1 / m) + t * spec.phi ** (-1 / m)) ** (-m)


@dataclass
class _Operator:
    """The equation at fixed t with exponent ``p`` and a scalar multiplier on phi."""

    grid: SphereGrid
    spec: ProblemSpec
    phi: np.ndarray
    p: float
    scale: float = 1.0

    def _admissible(self, u):
        if u.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} node values, got shape {u.shape}")
        if np.any(~np.isfinite(u)) or np.any(u <= 0):
            bad = int(np.flatnonzero(~(u > 0))[0])
            raise AdmissibilityError(bad, np.nan, f"u must be positive; node {bad} has u={u[bad]:.6g}")
        a = covariant_hessian(u, self.grid) + u[:, None, None] * np.eye(self.grid.n)
        lam, Q = np.linalg.eigh(a)
        margin = np.asarray(pk_margin(lam, self.spec.P, self.spec.k))
        if np.any(margin <= 0):
            bad = int(np.argmin(margin))
            raise AdmissibilityError(bad, margin[bad])
        return lam, Q

    def _rhs_terms(self, u, du):
        s = u**2 + np.sum(du**2, axis=1)
        sp_ = self.spec
        return s, u ** (self.p - 1) * s ** ((sp_.k + 1 - sp_.q) / 2) * self.phi * self.scale

    def residual(self, u, form="normalized"):
        u = np.asarray(u, dtype=float)
        lam, _ = self._admissible(u)
        du = gradient(u, self.grid)
        _, rhs = self._rhs_terms(u, du)
        sp_ = self.spec
        if form == "raw":
            return operator_value(lam, sp_.P, sp_.k, sp_.l, "raw") - rhs
        if form == "normalized":
            return operator_value(lam, sp_.P, sp_.k, sp_.l, "normalized") - rhs ** (1 / (sp_.k - sp_.l))
        raise ValueError(f"unknown residual form {form!r}")

    def rhs_normalized(self, u):
        _, rhs = self._rhs_terms(u, gradient(u, self.grid))
        return rhs ** (1 / (self.spec.k - self.spec.l))

    def jacobian(self, u):
        """Sparse derivative of the normalised residual (exact for the discrete operator)."""
        u = np.asarray(u, dtype=float)
        lam, Q = self._admissible(u)
        sp_, grid = self.spec, self.grid
        kl = sp_.k - sp_.l
        g = operator_grad(lam, sp_.P, sp_.k, sp_.l, "normalized")
        G = (Q * g[:, None, :]) @ np.swapaxes(Q, 1, 2)
        J = sp.diags(np.trace(G, axis1=1, axis2=2))
        for (i, j), op in grid.hess_ops.items():
            weight = G[:, i, j] if i == j else 2 * G[:, i, j]
            J = J + sp.diags(weight) @ op
        du = gradient(u, grid)
        s = u**2 + np.sum(du**2, axis=1)
        alpha = (self.p - 1) / kl
        beta = (sp_.k + 1 - sp_.q) / (2 * kl)
        phit = (self.phi * self.scale) ** (1 / kl)
        d_u = alpha * u ** (alpha - 1) * s**beta * phit + beta * u**alpha * s ** (beta - 1) * phit * 2 * u
        J = J - sp.diags(d_u)
        d_s = beta * u**alpha * s ** (beta - 1) * phit
        for i, op in enumerate(grid.grad_ops):
            if op is not None:
                J = J - sp.diags(2 * d_s * du[:, i]) @ op
        return J.tocsc()


def _as_u(u, grid):
    if isinstance(u, SolutionField):
        return u.u, u.grid
    if grid is None:
        raise ValueError("pass grid= when u is a plain array")
    return np.asarray(u, dtype=float), grid


def _operator(spec, grid, t, p=None, scale=1.0):
    if spec.phi is None:
        raise ValueError("the problem has no phi")
    if np.shape(spec.phi) != (grid.size,):
        raise ValueError(f"phi has shape {np.shape(spec.phi)}, grid has {grid.size} nodes")
    if spec.n != grid.n:
        raise ValueError(f"problem is posed on S^{spec.n} but the grid is S^{grid.n}")
    p = spec.p if p is None else p
    return _Operator(grid, spec, homotopy_phi(spec, t, p), p, scale)


def residual(u, spec: ProblemSpec, t: float = 1.0, *, grid=None, form="raw"):
    """Node residual of the equation with ``phi`` replaced by the homotopy ``phi_t``.

    ``form="raw"`` gives ``sigma_k/sigma_l - u^{p-1}(...)phi_t``;
    ``form="normalized"`` gives the (k-l)-th root form that Newton drives to
    zero and that :func:`linearize` differentiates.
    """
    u, grid = _as_u(u, grid)
    return _operator(spec, grid, t).residual(u, form)


def linearize(u, spec: ProblemSpec, t: float = 1.0, *, grid=None):
    """Sparse matrix of the linearised normalised operator at ``u``.

    ``L v = F~^{ij}(v_ij + v delta_ij) - d_u(rhs) v - d_{grad u}(rhs) . grad v``.
    """
    u, grid = _as_u(u, grid)
    return _operator(spec, grid, t).jacobian(u)


def _damped_newton(x, residual_fn, jacobian_fn, tol, max_iters, max_halvings):
    """Newton with step halving; ``residual_fn`` raises AdmissibilityError off the cone."""
    r = residual_fn(x)
    rn = np.max(np.abs(r))
    for it in range(max_iters + 1):
        if rn <= tol:
            return x, it, rn
        if it == max_iters:
            raise SolverError(f"Newton did not converge in {max_iters} iterations (residual {rn:.3e})")
        J = jacobian_fn(x)
        try:
            step = spla.spsolve(J, -r)
        except RuntimeError as exc:
            raise LinearSolveError(f"sparse factorisation failed: {exc}") from exc
        if not np.all(np.isfinite(step)):
            raise LinearSolveError("linear solve produced non-finite values")
        alpha = 1.0
        for _ in range(max_halvings + 1):
            trial = x + alpha * step
            try:
                r_trial = residual_fn(trial)
            except AdmissibilityError:
                alpha *= 0.5
                continue
            rn_trial = np.max(np.abs(r_trial))
            if np.isfinite(rn_trial) and (rn_trial <= tol or rn_trial <= (1 - alpha / 4) * rn):
                break
            alpha *= 0.5
        else:
            raise LineSearchError(f"line search exhausted after {max_halvings} halvings "
                                  f"(residual {rn:.3e})")
        x, r, rn = trial, r_trial, rn_trial
        log.debug("newton it=%d alpha=%.3g res=%.3e", it + 1, alpha, rn)
    raise AssertionError("unreachable")


def _field(u, grid, spec, op, **meta):
    fld = spectrum_field(u, grid, spec, residual=op.residual(u, "raw"))
    fld.meta.update(meta)
    return fld


def newton_solve(u0, spec: ProblemSpec, t: float = 1.0, tol: float = 1e-10, *, grid=None,
                 max_iters: int = 50, max_halvings: int = 40) -> SolutionField:
    """Solve the equation at ``t`` from an admissible start ``u0``.

    Every accepted iterate stays positive and inside the (P, k)-cone.  ``tol``
    bounds the max-norm of the normalised residual.  The returned field
    carries ``meta['iterations']`` and ``meta['res_inf']``.
    """
    u0, grid = _as_u(u0, grid)
    op = _operator(spec, grid, t)
    op._admissible(u0)  # precondition: raises AdmissibilityError
    u, iters, rn = _damped_newton(u0.copy(), op.residual, op.jacobian, tol, max_iters, max_halvings)
    return _field(u, grid, spec, op, iterations=iters, res_inf=rn, t=t)


@dataclass
class HomotopyState:
    t: float
    u: SolutionField
    newton_iters: int
    min_margin: float
    min_eig_a: float
    res_inf: float


def _state(t, fld):
    return HomotopyState(t, fld, fld.meta["iterations"], float(fld.margin.min()),
                         fld.min_eig, fld.meta["res_inf"])


def _march(solve, x0, steps, min_dt):
    """Advance t from 0 to 1, halving the step whenever ``solve(t, x)`` fails."""
    states = [solve(0.0, x0)]
    t, dt = 0.0, 1.0 / steps
    while t < 1.0:
        t_new = min(1.0, t + dt)
        if 1.0 - t_new < 1e-12:
            t_new = 1.0
        try:
            st = solve(t_new, states[-1])
        except (SolverError, AdmissibilityError) as exc:
            dt *= 0.5
            log.info("step to t=%.6g failed (%s); dt -> %.3g", t_new, exc, dt)
            if dt < min_dt:
                raise ContinuationError("continuation step underflow", t, states) from exc
            continue
        states.append(st)
        t = t_new
    return states


def continuation(spec: ProblemSpec, steps: int = 10, *, grid: SphereGrid, u0=None,
                 tol: float = 1e-10, min_dt: float = 1e-4, max_iters: int = 50,
                 max_halvings: int = 40) -> list[HomotopyState]:
    """Follow ``phi_t`` from t = 0 (where u = 1 solves the equation) to t = 1.

    ``u0`` is the initial guess for the t = 0 solve (default: u = 1).
    """
    if spec.case != "nonhomogeneous":
        raise ValueError(f"continuation needs p > q - l (got p - q + l = {spec.growth:g}); "
                         "use homogeneous_solve for p = q - l")
    start = np.ones(grid.size) if u0 is None else _as_u(u0, grid)[0]

    def solve(t, prev):
        guess = prev if isinstance(prev, np.ndarray) else prev.u.u
        fld = newton_solve(guess, spec, t, tol, grid=grid, max_iters=max_iters,
                           max_halvings=max_halvings)
        return _state(t, fld)

    return _march(solve, start, steps, min_dt)


@dataclass
class HomogeneousResult:
    """Outcome of the epsilon-regularised path in the case p = q - l."""

    field: SolutionField
    gamma: float
    eps: list
    gammas: list
    log_min_u: list
    interval: tuple
    states: list = field(default_factory=list)
    gammas_max: list = field(default_factory=list)  # (max u_eps)^eps

    def __iter__(self):
        # allows ``u, gamma = homogeneous_solve(...)``
        return iter((self.field, self.gamma))

    @property
    def within_interval(self) -> list:
        """Interval membership of every ``u_eps^eps``, with ``10 h^2`` slack."""
        lo, hi = self.interval
        slack = 10 * self.field.grid.spacing**2
        return [lo - slack <= g and g_max <= hi + slack
                for g, g_max in zip(self.gammas, self.gammas_max)]

    @property
    def gamma_extrapolated(self) -> float:
        """Polynomial extrapolation of gamma_eps to eps = 0 through the last three points."""
        e, g = np.asarray(self.eps[-3:]), np.asarray(self.gammas[-3:])
        if e.size == 1:
            return float(g[0])
        return float(np.polyval(np.polyfit(e, g, e.size - 1), 0.0))


class _Bordered:
    """Unknowns (w, log g) with u_eps = s w, g = s^eps and w[ref] = 1."""

    def __init__(self, op: _Operator, ref: int):
        self.op = op
        self.ref = ref
        self.kl = op.spec.k - op.spec.l

    def split(self, x):
        return x[:-1], x[-1]

    def residual(self, x):
        w, eta = self.split(x)
        self.op.scale = np.exp(eta)
        r = self.op.residual(w, "normalized")
        return np.r_[r, w[self.ref] - 1.0]

    def jacobian(self, x):
        w, eta = self.split(x)
        self.op.scale = np.exp(eta)
        J = self.op.jacobian(w)
        col = -self.op.rhs_normalized(w) / self.kl
        size = w.size
        row = sp.csr_matrix(([1.0], ([0], [self.ref])), shape=(1, size))
        return sp.bmat([[J, sp.csc_matrix(col[:, None])], [row, None]], format="csc")


def homogeneous_solve(spec: ProblemSpec, eps_list=DEFAULT_EPS, *, grid: SphereGrid,
                      steps: int = 10, tol: float = 1e-10, cauchy_tol: float = 1e-4,
                      ref: int = 0, min_dt: float = 1e-4, max_iters: int = 50,
                      max_halvings: int = 40) -> HomogeneousResult:
    """Solve the scale-invariant case through ``u^{p-1+eps}`` regularisations.

    For every eps the regularised equation is solved for ``u_eps = s w`` with
    ``w[ref] = 1`` and ``g = s^eps`` as an extra unknown, so no solution of
    size ``(c0/phi)^{1/eps}`` is ever formed.  Then
    ``gamma_eps = (min u_eps)^eps = g (min w)^eps``.  The first eps is reached
    by continuation in t; later ones start from the previous solution.
    Raises :class:`GammaError` if the last three gamma_eps differ by more than
    ``cauchy_tol``.
    """
    if spec.case != "homogeneous" or spec.p <= 1:
        raise ValueError(f"homogeneous_solve needs p = q - l > 1 (got p={spec.p:g}, q - l={spec.q - spec.l:g})")
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError(f"eps_list must be positive and strictly decreasing, got {eps_list}")
    if not 0 <= ref < grid.size:
        raise ValueError(f"reference node {ref} outside the grid")

    def bordered(eps, t):
        return _Bordered(_operator(spec, grid, t, p=spec.p + eps), ref)

    def solve_at(eps, t, x):
        sysm = bordered(eps, t)
        sysm.op._admissible(x[:-1])
        x, iters, rn = _damped_newton(x.copy(), sysm.residual, sysm.jacobian, tol,
                                      max_iters, max_halvings)
        return x, iters, rn

    def path(eps):
        def solve(t, prev):
            x0 = prev if isinstance(prev, np.ndarray) else prev[0]
            x, iters, rn = solve_at(eps, t, x0)
            return x, t, iters, rn
        return _march(solve, np.r_[np.ones(grid.size), 0.0], steps, min_dt)

    gammas, gammas_max, log_min_u, states = [], [], [], []
    x = None
    for eps in eps_list:
        if x is not None:
            try:
                x, iters, rn = solve_at(eps, 1.0, x)
                trail = [(x, 1.0, iters, rn)]
            except (SolverError, AdmissibilityError):
                x = None
        if x is None:
            trail = path(eps)
            x = trail[-1][0]
        w, eta = x[:-1], x[-1]
        gammas.append(float(np.exp(eta) * w.min() ** eps))
        gammas_max.append(float(np.exp(eta) * w.max() ** eps))
        log_min_u.append(float(eta / eps + np.log(w.min())))
        grad_ratio = np.linalg.norm(gradient(w, grid), axis=1) / w
        states.append({"eps": eps, "steps": len(trail), "iterations": [s[2] for s in trail],
                       "res_inf": float(trail[-1][3]), "max_grad_ratio": float(grad_ratio.max())})
        log.info("eps=%g gamma_eps=%.12g", eps, gammas[-1])

    w = x[:-1]
    u_tilde = w / w.min()
    gamma = gammas[-1]
    limit = _operator(spec, grid, 1.0, scale=gamma)
    fld = _field(u_tilde, grid, spec, limit, eps=eps_list[-1], gamma=gamma)
    phi = spec.phi
    result = HomogeneousResult(fld, gamma, eps_list, gammas, log_min_u,
                               (spec.c0 / phi.max(), spec.c0 / phi.min()), states, gammas_max)
    tail = gammas[-3:]
    if len(tail) > 1 and max(tail) - min(tail) > cauchy_tol:
        err = GammaError(gammas)
        err.result = result
        raise err
    return result


def write_trace(states, path) -> None:
    """CSV of the continuation path: t, iters, res_inf, min_margin, min_eig_a."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "iters", "res_inf", "min_margin", "min_eig_a"])
        for st in states:
            writer.writerow([format(st.t, ".17g"), st.newton_iters, format(st.res_inf, ".17g"),
                             format(st.min_margin, ".17g"), format(st.min_eig_a, ".17g")])
