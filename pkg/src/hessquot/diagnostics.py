"""Checks of the hypotheses on phi and of the a-priori bounds on solutions."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from .problem import EXPONENT_TOL, ProblemSpec
from .sphere import SolutionField, SphereGrid, covariant_hessian, gradient

__all__ = [
    "PhiReport",
    "BoundCheck",
    "BoundReport",
    "PHI_TOL",
    "check_phi",
    "structural_eig",
    "build_admissible_phi",
    "verify_bounds",
    "verify_homogeneous",
]

PHI_TOL = 1e-10


@dataclass
class PhiReport:
    case_id: str
    beta: float
    min_eig: float
    passed: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def structural_eig(h, grid: SphereGrid, beta: float = 1.0) -> np.ndarray:
    """Smallest eigenvalue of ``nabla^2 h + beta h I`` at every node."""
    h = np.asarray(h, dtype=float)
    mat = covariant_hessian(h, grid) + beta * h[:, None, None] * np.eye(grid.n)
    return np.linalg.eigvalsh(mat)[:, 0]


def _case(spec: ProblemSpec):
    """Case label of the existence theorem and its multiplier beta."""
    k, l, p, q = spec.k, spec.l, spec.p, spec.q
    wide = (2 * k + p - l - 1) / spec.m
    above = q > k + 1 + EXPONENT_TOL
    notes = []
    if spec.case == "homogeneous":
        if above:
            case, beta = "ii", wide
        elif q > l + 1:
            case, beta = "i", 1.0
        else:
            case, beta = "none", 1.0
    elif spec.case == "nonhomogeneous":
        if above:
            case, beta = "iii", wide
        elif p >= 1 and q - l < 1:
            case, beta = "i", 1.0
        elif q - l >= 1:
            case, beta = "ii", 1.0
        else:
            case, beta = "none", 1.0
    else:
        case, beta = "none", 1.0
    if case == "none":
        notes.append(f"(p, q) = ({p:g}, {q:g}) is covered by no case of the existence theorems")
    if above:
        # the full rank lemma needs this too; report which condition is the binding one
        if q < 2 * k - l + p:
            notes.append(f"binding: phi condition with beta={wide:.6g} (q < 2k-l+p holds)")
        else:
            notes.append(f"binding: q={q:g} >= 2k-l+p={2 * k - l + p:g}, full rank is not guaranteed")
    if spec.P < 2 or spec.k > comb(spec.n - 1, spec.P - 1):
        notes.append("theorem hypotheses P > 1 and k <= C(n-1, P-1) are not met")
    return case, beta, notes


def check_phi(phi, spec: ProblemSpec, grid: SphereGrid) -> PhiReport:
    """Test ``nabla^2 h + beta h I >= 0`` for ``h = phi^(-1/(k-l+p-1))``.

    The condition is read as a matrix inequality, so it does not depend on
    the frame.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (grid.size,):
        raise ValueError(f"phi has shape {phi.shape}, grid has {grid.size} nodes")
    if np.any(~np.isfinite(phi)) or np.any(phi <= 0):
        raise ValueError("phi must be finite and positive at every node")
    case, beta, notes = _case(spec)
    h = phi ** (-1.0 / spec.m)
    min_eig = float(structural_eig(h, grid, beta).min())
    passed = min_eig >= -PHI_TOL and case != "none"
    return PhiReport(case, beta, min_eig, passed, notes)


def build_admissible_phi(h_base, spec: ProblemSpec, grid: SphereGrid) -> np.ndarray:
    """``phi = h^(-(k-l+p-1))``; ``h`` must be positive with ``nabla^2 h + h I >= 0``."""
    h = np.asarray(h_base, dtype=float)
    if h.shape != (grid.size,):
        raise ValueError(f"h has shape {h.shape}, grid has {grid.size} nodes")
    if np.any(h <= 0):
        raise ValueError("h must be positive")
    worst = float(structural_eig(h, grid).min())
    if worst < -PHI_TOL:
        raise ValueError(f"h is not spherically convex: min eigenvalue of hess h + h I is {worst:.3e}")
    return h ** (-spec.m)


@dataclass
class BoundCheck:
    name: str
    lower: float | None
    upper: float | None
    attained_min: float
    attained_max: float
    slack: float
    passed: bool | None  # None for monitors

    @property
    def violation(self) -> float:
        v = 0.0
        if self.lower is not None:
            v = max(v, self.lower - self.attained_min)
        if self.upper is not None:
            v = max(v, self.attained_max - self.upper)
        return v


@dataclass
class BoundReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.passed is not None)

    def __getitem__(self, name) -> BoundCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": [dict(asdict(c), violation=c.violation) for c in self.checks]}


def _check(name, lower, upper, lo_val, hi_val, slack):
    ok = (lower is None or lo_val >= lower - slack) and (upper is None or hi_val <= upper + slack)
    return BoundCheck(name, lower, upper, float(lo_val), float(hi_val), float(slack), bool(ok))


def _hessian_monitor(fld: SolutionField):
    size = np.abs(np.linalg.eigvalsh(fld.hess)).max(axis=1)
    return BoundCheck("C2_monitor", None, None, float(size.min()), float(size.max()), 0.0, None)


def verify_bounds(fld: SolutionField, spec: ProblemSpec) -> BoundReport:
    """C0 sandwich, gradient bound and a Hessian-size monitor for a terminal solution.

    Every bound gets an absolute slack of ``10 h^2``.
    """
    if spec.case != "nonhomogeneous":
        raise ValueError("verify_bounds covers p > q - l; use verify_homogeneous otherwise")
    grid = fld.grid
    slack = 10 * grid.spacing**2
    phi = spec.phi
    g = spec.growth
    lo, hi = spec.c0 / phi.max(), spec.c0 / phi.min()
    ug = fld.u**g
    c0 = _check("C0", lo, hi, ug.min(), ug.max(), slack)
    phi_ratio = np.linalg.norm(gradient(phi, grid), axis=1) / phi
    ratio = np.linalg.norm(fld.grad, axis=1) / fld.u
    bound = phi_ratio.max() / g
    c1 = _check("C1", None, bound, ratio.min(), ratio.max(), slack)
    return BoundReport([c0, c1, _hessian_monitor(fld)])


def verify_homogeneous(result, spec: ProblemSpec) -> BoundReport:
    """Two-sided bound on ``u_eps^eps`` for every eps, and the gradient of the normalised field."""
    fld = result.field
    slack = 10 * fld.grid.spacing**2
    lo, hi = result.interval
    checks = [
        _check(f"C0_eps={eps:g}", lo, hi, gmin, gmax, slack)
        for eps, gmin, gmax in zip(result.eps, result.gammas, result.gammas_max)
    ]
    ratio = np.linalg.norm(fld.grad, axis=1) / fld.u
    checks.append(BoundCheck("C1_monitor", None, None, float(ratio.min()), float(ratio.max()), 0.0, None))
    checks.append(_hessian_monitor(fld))
    return BoundReport(checks)
