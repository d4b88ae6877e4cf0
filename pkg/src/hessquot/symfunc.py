"""Elementary symmetric functions, their minors, quotients and Garding cones.

Every function broadcasts over leading axes: a spectrum is the last axis of
``lam``, so a batch of spectra of shape ``(m, n)`` gives results of shape
``(m,)``.  Coordinates are 0-based.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "ConeError",
    "sigma",
    "sigma_all",
    "sigma_minor",
    "sigma_minors",
    "in_gamma",
    "gamma_margin",
    "quotient",
    "quotient_grad",
]


class ConeError(ValueError):
    """Raised when a spectrum leaves the cone an operator is defined on."""


def _as_spectrum(lam):
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0:
        raise ValueError("a spectrum needs at least one entry")
    return lam


def sigma_all(lam, kmax):
    """Return ``[sigma_0(lam), ..., sigma_kmax(lam)]`` along a new last axis.

    Uses the product expansion of ``prod_i (1 + lam_i t)`` truncated at
    degree ``kmax``: one pass over the entries, O(n kmax) work, no subset
    enumeration and no power sums.
    """
    lam = _as_spectrum(lam)
    kmax = int(kmax)
    out = np.zeros(lam.shape[:-1] + (max(kmax, 0) + 1,))
    out[..., 0] = 1.0
    if kmax <= 0:
        return out
    for j in range(lam.shape[-1]):
        step = lam[..., j, None] * out[..., :-1]
        out[..., 1:] += step
    return out


def sigma(k, lam):
    """k-th elementary symmetric function; 1 for k = 0, 0 for k < 0 or k > n."""
    lam = _as_spectrum(lam)
    k = int(k)
    n = lam.shape[-1]
    if k < 0 or k > n:
        return np.zeros(lam.shape[:-1])[()]
    return sigma_all(lam, k)[..., k][()]


def _minor_table(lam, kmax):
    """sigma_j(lam | i) for all i and 0 <= j <= kmax, shape (..., n, kmax+1)."""
    n = lam.shape[-1]
    width = max(kmax, 0) + 1
    prefix = np.zeros(lam.shape[:-1] + (n + 1, width))
    suffix = np.zeros(lam.shape[:-1] + (n + 1, width))
    prefix[..., 0, 0] = 1.0
    suffix[..., n, 0] = 1.0
    for j in range(n):
        prefix[..., j + 1, :] = prefix[..., j, :]
        if width > 1:
            prefix[..., j + 1, 1:] += lam[..., j, None] * prefix[..., j, :-1]
    for j in range(n - 1, -1, -1):
        suffix[..., j, :] = suffix[..., j + 1, :]
        if width > 1:
            suffix[..., j, 1:] += lam[..., j, None] * suffix[..., j + 1, :-1]
    out = np.zeros(lam.shape[:-1] + (n, width))
    for d in range(width):
        # truncated product of the polynomials left and right of entry i
        acc = np.zeros(lam.shape[:-1] + (n,))
        for a in range(d + 1):
            acc += prefix[..., :n, a] * suffix[..., 1:, d - a]
        out[..., d] = acc
    return out


def sigma_minors(k, lam):
    """Vector of ``sigma_k(lam | i)`` for every coordinate i (entry i deleted)."""
    lam = _as_spectrum(lam)
    k = int(k)
    n = lam.shape[-1]
    if k < 0 or k > n - 1:
        return np.zeros(lam.shape)
    return _minor_table(lam, k)[..., k]


def sigma_minor(k, lam, i):
    """``sigma_k`` of ``lam`` with coordinate ``i`` removed.

    Equals the partial derivative of ``sigma_{k+1}`` in coordinate ``i``.
    """
    lam = _as_spectrum(lam)
    n = lam.shape[-1]
    if not 0 <= int(i) < n:
        raise IndexError(f"coordinate {i} out of range for a spectrum of length {n}")
    return sigma_minors(k, lam)[..., int(i)][()]


def gamma_margin(lam, k):
    """``min_{1<=j<=k} sigma_j(lam)``; positive exactly on the cone Gamma_k."""
    lam = _as_spectrum(lam)
    k = int(k)
    if k < 1:
        raise ValueError("cone level must be at least 1")
    return sigma_all(lam, k)[..., 1:].min(axis=-1)[()]


def in_gamma(lam, level):
    """True iff sigma_j(lam) > 0 for all 1 <= j <= level (strict, no tolerance)."""
    return gamma_margin(lam, level) > 0


def _check_orders(k, l, n):
    if not 0 <= l < k:
        raise ValueError(f"need 0 <= l < k, got k={k}, l={l}")
    if k > n:
        raise ValueError(f"k={k} exceeds the spectrum length {n}")


def _require_cone(lam, k):
    margin = np.asarray(gamma_margin(lam, k))
    if np.any(margin <= 0):
        bad = np.flatnonzero(margin.ravel() <= 0)
        raise ConeError(
            f"spectrum outside Gamma_{k} at {bad.size} point(s); "
            f"worst margin {margin.min():.3e}"
        )


def quotient(k, l, lam):
    """``sigma_k(lam) / sigma_l(lam)`` for ``lam`` in Gamma_k."""
    lam = _as_spectrum(lam)
    k, l = int(k), int(l)
    _check_orders(k, l, lam.shape[-1])
    _require_cone(lam, k)
    s = sigma_all(lam, k)
    return (s[..., k] / s[..., l])[()]


def quotient_grad(k, l, lam):
    """Gradient of ``sigma_k / sigma_l`` with respect to the entries of ``lam``.

    Component i is
    ``(sigma_{k-1}(lam|i) sigma_l - sigma_k sigma_{l-1}(lam|i)) / sigma_l**2``.
    """
    lam = _as_spectrum(lam)
    k, l = int(k), int(l)
    _check_orders(k, l, lam.shape[-1])
    _require_cone(lam, k)
    s = sigma_all(lam, k)
    minors = _minor_table(lam, k - 1)
    sk, sl = s[..., k, None], s[..., l, None]
    dk = minors[..., k - 1]
    dl = minors[..., l - 1] if l >= 1 else np.zeros_like(dk)
    return (dk * sl - sk * dl) / sl**2
