"""Problem data for ``sigma_k(Lambda)/sigma_l(Lambda) = u^{p-1} (u^2+|grad u|^2)^{(k+1-q)/2} phi``."""
from __future__ import annotations

from dataclasses import dataclass, replace
from math import comb

import numpy as np

__all__ = ["ProblemSpec", "EXPONENT_TOL"]

# exponent comparisons (p against q - l) are made with this tolerance
EXPONENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One instance of the equation on S^n.

    ``phi`` holds node values of the prescribed function on whatever grid the
    instance is solved on; it may be left unset for purely algebraic use.
    """

    n: int
    P: int
    k: int
    l: int
    p: float
    q: float
    phi: np.ndarray | None = None

    def __post_init__(self):
        for name in ("n", "P", "k", "l"):
            object.__setattr__(self, name, int(getattr(self, name)))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))
        if self.n < 2:
            raise ValueError(f"problem.n: sphere dimension must be >= 2, got {self.n}")
        if not 1 <= self.P <= self.n:
            raise ValueError(f"problem.P: need 1 <= P <= n={self.n}, got {self.P}")
        if not 0 <= self.l < self.k <= self.N:
            raise ValueError(
                f"problem.k/problem.l: need 0 <= l < k <= N=C({self.n},{self.P})={self.N}, "
                f"got k={self.k}, l={self.l}")
        if self.m <= 0:
            raise ValueError(f"problem.p: need k - l + p - 1 > 0, got {self.m}")
        if self.phi is not None:
            phi = np.asarray(self.phi, dtype=float)
            if np.any(~np.isfinite(phi)) or np.any(phi <= 0):
                raise ValueError("phi must be finite and positive at every node")
            object.__setattr__(self, "phi", phi)

    @property
    def N(self) -> int:
        return comb(self.n, self.P)

    @property
    def c0(self) -> float:
        """``C(N,k)/C(N,l) * P^(k-l)``: the operator value at the identity matrix."""
        return comb(self.N, self.k) / comb(self.N, self.l) * self.P ** (self.k - self.l)

    @property
    def m(self) -> float:
        """Exponent ``k - l + p - 1`` linking phi to its structural transform."""
        return self.k - self.l + self.p - 1

    @property
    def growth(self) -> float:
        """``p - q + l``; positive in the nonhomogeneous case, zero in the homogeneous one."""
        return self.p - self.q + self.l

    @property
    def case(self) -> str:
        if abs(self.growth) <= EXPONENT_TOL:
            return "homogeneous"
        return "nonhomogeneous" if self.growth > 0 else "unsupported"

    @property
    def special(self) -> bool:
        """True when ``q = k + 1`` (the gradient factor drops out)."""
        return abs(self.q - (self.k + 1)) <= EXPONENT_TOL

    def with_phi(self, phi) -> "ProblemSpec":
        return replace(self, phi=np.asarray(phi, dtype=float))

    def constant_solution(self, phi0: float) -> float:
        """Value of the constant solution for constant ``phi = phi0`` (nonhomogeneous case)."""
        if self.case != "nonhomogeneous":
            raise ValueError("constant solutions are unique only when p > q - l")
        return (self.c0 / phi0) ** (1.0 / self.growth)

    def params(self) -> dict:
        return {"n": self.n, "P": self.P, "k": self.k, "l": self.l, "p": self.p, "q": self.q}
