"""The P-eigenvalue map, the (P, k)-cone, the wedge-space derivation matrix W,
and the Hessian-quotient operator ``sigma_k(Lambda) / sigma_l(Lambda)``.

Matrices may be batched: ``A`` of shape ``(..., n, n)``.  Spectra are the last
axis of ``lam``.
"""
from __future__ import annotations

from enum import Enum
from functools import lru_cache

import numpy as np

from .multiindex import IndexTable, index_table, perm_sign, remove
from .symfunc import ConeError, gamma_margin, quotient_grad, sigma_all

__all__ = [
    "OperatorMode",
    "incidence",
    "lambda_vector",
    "pk_margin",
    "in_pk_cone",
    "derivation_matrix",
    "operator_value",
    "operator_grad",
    "f_value",
    "f_grad",
]


class OperatorMode(str, Enum):
    """Monotone transforms of the quotient ``F = sigma_k / sigma_l``.

    RAW is F itself, NORMALIZED is ``F**(1/(k-l))`` and HATTED is
    ``-F**(-1/(k-l))``.
    """

    RAW = "raw"
    NORMALIZED = "normalized"
    HATTED = "hatted"


@lru_cache(maxsize=None)
def _incidence(P, n):
    table = index_table(P, n)
    E = np.zeros((table.N, n))
    for pos, I in enumerate(table):
        E[pos, list(I)] = 1.0
    E.setflags(write=False)
    return E


def incidence(table: IndexTable) -> np.ndarray:
    """0/1 matrix E of shape (N, n) with ``Lambda = E @ lam``."""
    return _incidence(table.P, table.n)


def lambda_vector(lam, table: IndexTable):
    """``Lambda_I = sum_{i in I} lam_i`` for every I in ``table`` order."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape[-1] != table.n:
        raise ValueError(f"spectrum has length {lam.shape[-1]}, table expects n={table.n}")
    return lam @ incidence(table).T


def pk_margin(lam, P: int, k: int):
    """``min_{j<=k} sigma_j(Lambda(lam))``; positive exactly on the (P, k)-cone."""
    lam = np.asarray(lam, dtype=float)
    table = index_table(P, lam.shape[-1])
    if not 1 <= k <= table.N:
        raise ValueError(f"need 1 <= k <= N={table.N}, got k={k}")
    return gamma_margin(lambda_vector(lam, table), k)


def in_pk_cone(lam, P: int, k: int):
    return pk_margin(lam, P, k) > 0


@lru_cache(maxsize=None)
def _w_pattern(P, n):
    """Off-diagonal entries of W as (pos_I, pos_J, i, j, sign) arrays."""
    table = index_table(P, n)
    rows, cols, ii, jj, signs = [], [], [], [], []
    for pI, I in enumerate(table):
        for i in I:
            K = remove(I, i)
            s_i = perm_sign(i, K)
            for j in range(n):
                if j in I:
                    continue
                J = tuple(sorted(K + (j,)))
                rows.append(pI)
                cols.append(table.position(J))
                ii.append(i)
                jj.append(j)
                signs.append(s_i * perm_sign(j, K))
    out = tuple(np.array(v, dtype=int) for v in (rows, cols, ii, jj, signs))
    for arr in out:
        arr.setflags(write=False)
    return out


def derivation_matrix(A, table: IndexTable, *, atol=1e-12):
    """Matrix of the derivation ``D_A`` on P-vectors in the basis ``e_I``.

    ``W_II = sum_{i in I} a_ii``; ``W_IJ = s(i, K) s(j, K) a_ij`` when
    ``I = K + i`` and ``J = K + j``; zero otherwise.
    """
    A = np.asarray(A, dtype=float)
    n = table.n
    if A.shape[-2:] != (n, n):
        raise ValueError(f"expected {n}x{n} matrices, got shape {A.shape}")
    if not np.allclose(A, np.swapaxes(A, -1, -2), atol=atol, rtol=0):
        raise ValueError("derivation_matrix needs a symmetric matrix")
    N = table.N
    W = np.zeros(A.shape[:-2] + (N, N))
    diag = np.diagonal(A, axis1=-2, axis2=-1)
    W[..., np.arange(N), np.arange(N)] = diag @ incidence(table).T
    rows, cols, ii, jj, signs = _w_pattern(table.P, n)
    if rows.size:
        W[..., rows, cols] = signs * A[..., ii, jj]
    return W


def _mode(mode) -> OperatorMode:
    return OperatorMode(mode)


def _transform(q, k, l, mode):
    if mode is OperatorMode.RAW:
        return q
    if mode is OperatorMode.NORMALIZED:
        return q ** (1.0 / (k - l))
    return -(q ** (-1.0 / (k - l)))


def _chain_factor(q, k, l, mode):
    # d(mode value)/dq
    if mode is OperatorMode.RAW:
        return np.ones_like(q)
    if mode is OperatorMode.NORMALIZED:
        return q ** (1.0 / (k - l)) / ((k - l) * q)
    return q ** (-1.0 / (k - l)) / ((k - l) * q)


def _check_kl(k, l, N):
    if not 0 <= l < k <= N:
        raise ValueError(f"need 0 <= l < k <= N={N}, got k={k}, l={l}")


def operator_value(lam, P: int, k: int, l: int, mode="raw"):
    """Value of the selected transform of ``sigma_k(Lambda)/sigma_l(Lambda)``."""
    lam = np.asarray(lam, dtype=float)
    table = index_table(P, lam.shape[-1])
    _check_kl(k, l, table.N)
    Lam = lambda_vector(lam, table)
    s = sigma_all(Lam, k)
    if np.any(s[..., 1:].min(axis=-1) <= 0):
        raise ConeError(f"spectrum outside the ({P}, {k})-cone")
    q = s[..., k] / s[..., l]
    return _transform(q, k, l, _mode(mode))[()]


def operator_grad(lam, P: int, k: int, l: int, mode="raw"):
    """Gradient of :func:`operator_value` with respect to ``lam``."""
    lam = np.asarray(lam, dtype=float)
    table = index_table(P, lam.shape[-1])
    _check_kl(k, l, table.N)
    Lam = lambda_vector(lam, table)
    s = sigma_all(Lam, k)
    q = s[..., k] / s[..., l]
    dq = quotient_grad(k, l, Lam) @ incidence(table)
    return dq * _chain_factor(q, k, l, _mode(mode))[..., None]


def f_value(A, P: int, k: int, l: int, mode="raw", *, path="eigen"):
    """Operator value at symmetric matrices ``A``.

    ``path="eigen"`` diagonalises the n x n matrix; ``path="w"`` diagonalises
    the N x N derivation matrix instead and applies ``sigma_k/sigma_l`` to its
    eigenvalues.  Both must agree; the second is kept as a cross-check.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if path == "eigen":
        lam = np.linalg.eigvalsh(A)
        return operator_value(lam, P, k, l, mode)
    if path == "w":
        table = index_table(P, n)
        _check_kl(k, l, table.N)
        Lam = np.linalg.eigvalsh(derivation_matrix(A, table))
        s = sigma_all(Lam, k)
        if np.any(s[..., 1:].min(axis=-1) <= 0):
            raise ConeError(f"spectrum outside the ({P}, {k})-cone")
        return _transform(s[..., k] / s[..., l], k, l, _mode(mode))[()]
    raise ValueError(f"unknown path {path!r}")


def f_grad(A, P: int, k: int, l: int, mode="raw", *, path="eigen"):
    """Matrix ``F^{ij} = dF/da_ij``, so that ``dF = trace(F^{..} dA)`` for symmetric dA."""
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if path == "eigen":
        lam, Q = np.linalg.eigh(A)
        g = operator_grad(lam, P, k, l, mode)
        return (Q * g[..., None, :]) @ np.swapaxes(Q, -1, -2)
    if path == "w":
        table = index_table(P, n)
        _check_kl(k, l, table.N)
        Lam, Qw = np.linalg.eigh(derivation_matrix(A, table))
        s = sigma_all(Lam, k)
        q = s[..., k] / s[..., l]
        g = quotient_grad(k, l, Lam) * _chain_factor(q, k, l, _mode(mode))[..., None]
        GW = (Qw * g[..., None, :]) @ np.swapaxes(Qw, -1, -2)
        out = np.zeros(A.shape)
        E = incidence(table)
        diag_w = np.diagonal(GW, axis1=-2, axis2=-1)
        out[..., np.arange(n), np.arange(n)] = diag_w @ E
        rows, cols, ii, jj, signs = _w_pattern(table.P, n)
        if rows.size:
            scatter = np.zeros((rows.size, n * n))
            scatter[np.arange(rows.size), ii * n + jj] = 1.0
            contrib = signs * GW[..., rows, cols]
            out = out + (contrib @ scatter).reshape(A.shape)
        return out
    raise ValueError(f"unknown path {path!r}")
