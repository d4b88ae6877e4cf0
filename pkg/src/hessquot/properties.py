"""Seeded randomized checks of the algebraic properties of sigma_k, the
(P, k)-cone and the quotient operator.

Each check draws its own stream from ``SeedSequence(seed, spawn_key=(n, P,
k, l, check))``, so a report depends only on the seed and the tuple.
Identities are scored by ``|a - b| / max(1, |a|, |b|)``; inequalities by the
amount they fail, on the same scale.
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from math import comb

import numpy as np

from .lambda_op import derivation_matrix, f_grad, f_value, lambda_vector, operator_grad, operator_value, pk_margin
from .multiindex import index_table
from .symfunc import gamma_margin, quotient_grad, sigma_all, sigma_minors

__all__ = ["PropertyReport", "run_suite", "DEFAULT_DIMS", "IDENTITY_SLACK", "INEQUALITY_SLACK"]

IDENTITY_SLACK = 1e-10
INEQUALITY_SLACK = 1e-8
DEFAULT_DIMS = ((3, 2, 1, 0), (3, 2, 2, 1), (4, 2, 2, 0), (4, 3, 2, 1), (5, 2, 3, 1))


@dataclass
class PropertyReport:
    name: str
    dims: tuple
    trials: int
    worst_violation: float
    slack: float
    passed: bool
    empirical_constant: float | None = None
    acceptance_rate: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _scaled(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def _shortfall(lhs, rhs):
    """How far ``lhs <= rhs`` fails, relative to the size of the two sides."""
    return np.maximum(0.0, lhs - rhs) / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))


def _cone_samples(rng, n, P, k, count):
    """Spectra in the (P, k)-cone: positive-orthant shell points plus Gaussian spread.

    Returns ``(samples, acceptance_rate)``.
    """
    kept, drawn = [], 0
    while sum(len(x) for x in kept) < count:
        m = 2 * count
        z = np.abs(rng.standard_normal((m, n)))
        base = z / np.linalg.norm(z, axis=1, keepdims=True) * np.sqrt(n)
        spread = rng.uniform(0.0, 1.5, (m, 1)) * rng.standard_normal((m, n))
        lam = rng.uniform(0.5, 2.0, (m, 1)) * (base + spread)
        drawn += m
        kept.append(lam[pk_margin(lam, P, k) > 0])
    accepted = sum(len(x) for x in kept)
    return np.concatenate(kept)[:count], accepted / drawn


def _report(name, dims, trials, violation, slack, constant=None, rate=None, ok=None):
    worst = float(np.max(violation)) if np.size(violation) else 0.0
    passed = worst <= slack if ok is None else bool(ok)
    return PropertyReport(name, tuple(dims), int(trials), worst, slack, passed,
                          None if constant is None else float(constant),
                          None if rate is None else float(rate))


def _random_orthogonal(rng, count, n):
    q, r = np.linalg.qr(rng.standard_normal((count, n, n)))
    return q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]


def _sym(rng, count, n):
    x = rng.standard_normal((count, n, n))
    return 0.5 * (x + np.swapaxes(x, 1, 2))


def _matrices(lam, Q):
    return (Q * lam[:, None, :]) @ np.swapaxes(Q, 1, 2)


# -- checks on Gamma_k in R^N ------------------------------------------------

def _sigma_checks(rng, dims, trials):
    n, P, k, l = dims
    N = comb(n, P)
    out = []
    free = rng.uniform(-2, 2, (trials, N))
    s = sigma_all(free, N)
    worst = 0.0
    for j in range(1, N + 1):
        minors_j = sigma_minors(j, free)
        minors_j1 = sigma_minors(j - 1, free)
        rhs = minors_j + free * minors_j1
        worst = max(worst, float(_scaled(s[:, j, None], rhs).max()))
    out.append(_report("sigma_recursion", dims, trials, worst, IDENTITY_SLACK))

    worst = 0.0
    for j in range(1, N + 1):
        lhs = sigma_minors(j - 1, free).sum(axis=1)
        worst = max(worst, float(_scaled(lhs, (N - j + 1) * s[:, j - 1]).max()))
    out.append(_report("minor_sum", dims, trials, worst, IDENTITY_SLACK))

    # nesting: membership at level j implies every lower level
    margins = np.stack([gamma_margin(free, j) for j in range(1, N + 1)], axis=1)
    inside = margins > 0
    broken = inside[:, 1:] & ~inside[:, :-1]
    out.append(_report("cone_nesting", dims, trials, float(broken.sum()), 0.0))

    Lam, rate = _cone_samples(rng, N, 1, k, trials)
    mk = sigma_minors(k - 1, Lam)
    out.append(_report("minor_positive", dims, trials,
                       np.maximum(0.0, -mk.min(axis=1)), 0.0, rate=rate,
                       ok=bool(np.all(mk > 0))))

    grad = operator_grad(Lam, 1, k, l, "normalized")
    lower = (comb(N, k) / comb(N, l)) ** (1 / (k - l))
    out.append(_report("sigma_trace_bound", dims, trials,
                       _shortfall(lower, grad.sum(axis=1)), INEQUALITY_SLACK,
                       constant=grad.sum(axis=1).min(), rate=rate))

    f = lambda x: operator_value(x, 1, k, l, "normalized")  # noqa: E731
    out.append(_concavity("sigma_root_concavity", dims, rng, Lam, f, lambda x: gamma_margin(x, k), rate))

    desc = -np.sort(-Lam, axis=1)
    mins = sigma_minors(k - 1, desc)
    out.append(_report("minor_order", dims, trials,
                       _shortfall(mins[:, :-1], mins[:, 1:]).max(axis=1), INEQUALITY_SLACK, rate=rate))

    worst = 0.0
    sc = sigma_all(Lam, k)
    norm = lambda j: sc[:, j] / comb(N, j)  # noqa: E731
    for m_, l_, r_, s_ in itertools.product(range(k + 1), repeat=4):
        if m_ > l_ >= 0 and r_ > s_ >= 0 and m_ >= r_ and l_ >= s_:
            lhs = (norm(m_) / norm(l_)) ** (1 / (m_ - l_))
            rhs = (norm(r_) / norm(s_)) ** (1 / (r_ - s_))
            worst = max(worst, float(_shortfall(lhs, rhs).max()))
    out.append(_report("newton_maclaurin", dims, trials, worst, INEQUALITY_SLACK, rate=rate))
    return out


def _concavity(name, dims, rng, samples, f, margin, rate):
    """Midpoint test on random pairs plus second differences with step 1e-3."""
    trials = len(samples)
    other = samples[rng.permutation(trials)]
    mid = 0.5 * (samples + other)
    fm, fa, fb = f(mid), f(samples), f(other)
    v_mid = _shortfall(0.5 * (fa + fb), fm)

    d = rng.standard_normal(samples.shape)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    step = 1e-3 * np.maximum(1.0, np.linalg.norm(samples, axis=1, keepdims=True))
    plus, minus = samples + step * d, samples - step * d
    ok = (margin(plus) > 0) & (margin(minus) > 0)
    second = np.zeros(trials)
    second[ok] = f(plus[ok]) - 2 * fa[ok] + f(minus[ok])
    v_sec = np.maximum(0.0, second) / np.maximum(1.0, np.abs(fa))
    return _report(name, dims, trials, np.maximum(v_mid, v_sec), INEQUALITY_SLACK, rate=rate)


# -- checks on the (P, k)-cone in R^n -------------------------------------

def _pk_checks(rng, dims, trials):
    n, P, k, l = dims
    N = comb(n, P)
    table = index_table(P, n)
    out = []
    lam, rate = _cone_samples(rng, n, P, k, trials)
    lam = -np.sort(-lam, axis=1)

    # ordering of derivatives in lambda and in Lambda
    g_lam = operator_grad(lam, P, k, l, "raw")
    Lam = lambda_vector(lam, table)
    order = np.argsort(-Lam, axis=1, kind="stable")
    g_Lam = np.take_along_axis(quotient_grad(k, l, Lam), order, axis=1)
    v = np.maximum(_shortfall(g_lam[:, :-1], g_lam[:, 1:]).max(axis=1),
                   _shortfall(g_Lam[:, :-1], g_Lam[:, 1:]).max(axis=1) if N > 1 else 0.0)
    out.append(_report("derivative_order", dims, trials, v, INEQUALITY_SLACK, rate=rate))

    g = operator_grad(lam, P, k, l, "normalized")
    total = g.sum(axis=1)
    ratio = g.min(axis=1) / total
    applicable = k <= comb(n - 1, P - 1)
    c = float(ratio.min())
    out.append(_report("uniform_ellipticity", dims, trials,
                       max(0.0, -c) if applicable else 0.0, 0.0, constant=c, rate=rate,
                       ok=(c > 0) if applicable else True))

    f = lambda x: operator_value(x, P, k, l, "normalized")  # noqa: E731
    out.append(_concavity("quotient_concavity", dims, rng, lam, f, lambda x: pk_margin(x, P, k), rate))
    lower = P * (comb(N, k) / comb(N, l)) ** (1 / (k - l))
    out.append(_report("quotient_trace_bound", dims, trials, _shortfall(lower, total),
                       INEQUALITY_SLACK, constant=total.min(), rate=rate))
    return out


def _matrix_checks(rng, dims, trials):
    n, P, k, l = dims
    table = index_table(P, n)
    out = []

    A = _sym(rng, trials, n)
    W = derivation_matrix(A, table)
    spec_w = np.linalg.eigvalsh(W)
    spec_l = np.sort(lambda_vector(np.linalg.eigvalsh(A), table), axis=1)
    out.append(_report("w_duality", dims, trials, _scaled(spec_w, spec_l).max(axis=1), 1e-9))

    lam, rate = _cone_samples(rng, n, P, k, trials)
    A = _matrices(lam, _random_orthogonal(rng, trials, n))
    Q = _random_orthogonal(rng, trials, n)
    rotated = np.swapaxes(Q, 1, 2) @ A @ Q
    rotated = 0.5 * (rotated + np.swapaxes(rotated, 1, 2))
    fa = f_value(A, P, k, l)
    out.append(_report("orthogonal_invariance", dims, trials,
                       _scaled(f_value(rotated, P, k, l), fa), 1e-9, rate=rate))
    out.append(_report("eigen_w_paths", dims, trials,
                       _scaled(f_value(A, P, k, l, path="w"), fa), IDENTITY_SLACK, rate=rate))

    # directional derivatives along unit directions; error relative to |G| |X|
    X = _sym(rng, trials, n)
    X /= np.linalg.norm(X, axis=(1, 2), keepdims=True)
    h = (1e-6 * (1 + np.linalg.norm(A, axis=(1, 2))))[:, None, None]
    fd = (f_value(A + h * X, P, k, l) - f_value(A - h * X, P, k, l)) / (2 * h[:, 0, 0])
    G = f_grad(A, P, k, l)
    exact = np.einsum("bij,bij->b", G, X)
    rel = np.abs(fd - exact) / np.linalg.norm(G, axis=(1, 2))
    out.append(_report("f_grad_vs_fd", dims, trials, rel, 1e-6, rate=rate))
    grad_w = f_grad(A, P, k, l, path="w")
    out.append(_report("f_grad_eigen_w_paths", dims, trials,
                       _scaled(grad_w, f_grad(A, P, k, l)).max(axis=(1, 2)), 1e-9, rate=rate))
    return out


def _inverse_convexity(rng, dims, trials):
    """Inverse convexity on spectra in Gamma_n, second derivatives by differencing f_grad."""
    n, P, k, l = dims
    lam, rate = _cone_samples(rng, n, 1, n, trials)
    A = _matrices(lam, _random_orthogonal(rng, trials, n))
    xi = _sym(rng, trials, n)
    xi /= np.linalg.norm(xi, axis=(1, 2), keepdims=True)
    h = 1e-5
    dG = (f_grad(A + h * xi, P, k, l, "hatted") - f_grad(A - h * xi, P, k, l, "hatted")) / (2 * h)
    second = np.einsum("bij,bij->b", dG, xi)
    G = f_grad(A, P, k, l, "hatted")
    cross = 2 * np.trace(G @ xi @ np.linalg.inv(A) @ xi, axis1=1, axis2=2)
    form = second + cross
    scale = np.maximum(1.0, np.abs(second) + np.abs(cross))
    return [_report("inverse_convexity", dims, trials, np.maximum(0.0, -form) / scale,
                    INEQUALITY_SLACK, constant=float((form / scale).min()), rate=rate)]


_CHECKS = (_sigma_checks, _pk_checks, _matrix_checks, _inverse_convexity)


def _validate(dims):
    try:
        n, P, k, l = (int(x) for x in dims)
    except (TypeError, ValueError):
        raise ValueError(f"dimension tuple must be (n, P, k, l), got {dims!r}") from None
    if n < 2 or not 1 <= P <= n:
        raise ValueError(f"invalid (n, P) = ({n}, {P}): need n >= 2 and 1 <= P <= n")
    N = comb(n, P)
    if not 0 <= l < k <= N:
        raise ValueError(f"invalid (k, l) = ({k}, {l}) for N = C({n},{P}) = {N}: need 0 <= l < k <= N")
    return n, P, k, l


def run_suite(seed: int, dims=DEFAULT_DIMS, trials: int = 1000) -> list[PropertyReport]:
    """Run every check for every ``(n, P, k, l)`` tuple; one report per check and tuple."""
    tuples = [_validate(d) for d in dims]
    if trials < 1:
        raise ValueError("trials must be positive")
    reports = []
    for tup in tuples:
        for idx, check in enumerate(_CHECKS):
            seq = np.random.SeedSequence(int(seed), spawn_key=(*tup, idx))
            reports.extend(check(np.random.default_rng(seq), tup, trials))
    return reports
