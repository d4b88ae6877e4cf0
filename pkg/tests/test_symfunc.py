import itertools
from math import comb, prod

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hessquot.symfunc import (
    ConeError,
    gamma_margin,
    in_gamma,
    quotient,
    quotient_grad,
    sigma,
    sigma_all,
    sigma_minor,
    sigma_minors,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
spectra = st.integers(2, 7).flatmap(lambda n: arrays(float, n, elements=finite))


def brute_sigma(k, lam):
    if k < 0 or k > len(lam):
        return 0.0
    return float(sum(prod(c) for c in itertools.combinations(lam, k)))


def cone_point(rng, n, k):
    while True:
        lam = rng.uniform(0.2, 2.0, n) + rng.normal(0, 0.8, n)
        if in_gamma(lam, k):
            return lam


# -- examples -----------------------------------------------------------------

def test_sigma_examples():
    assert sigma(2, [1, 1, 1]) == 3
    assert sigma(4, [1, 2, 3]) == 0
    assert sigma(2, [4, 4, 2, 4, 2, 0]) == pytest.approx(100)


def test_sigma_conventions():
    assert sigma(0, [5.0, -2.0]) == 1
    assert sigma(-1, [5.0, -2.0]) == 0


def test_sigma_minor_examples():
    assert sigma_minor(1, [1, 2, 3], 0) == 5
    assert sigma_minor(0, [7, -1, 2], 2) == 1
    assert sigma_minor(2, [1, 2, 3], 1) == 3


def test_sigma_minor_index_out_of_range():
    with pytest.raises(IndexError):
        sigma_minor(1, [1, 2, 3], 3)
    with pytest.raises(IndexError):
        sigma_minor(1, [1, 2, 3], -1)


def test_in_gamma_examples():
    assert in_gamma([1, 1, 1], 3)
    assert not in_gamma([-1, 3], 2)
    assert in_gamma([-1, 3], 1)


def test_in_gamma_is_strict():
    assert not in_gamma([1.0, 0.0], 2)
    assert gamma_margin([1.0, 0.0], 2) == 0.0


def test_quotient_examples():
    assert quotient(2, 0, [1, 1, 1]) == 3
    assert quotient(2, 1, [1, 1, 1]) == 1
    assert quotient(2, 1, [2, 1, 1]) == pytest.approx(5 / 4)


def test_quotient_rejects_cone_violation():
    with pytest.raises(ConeError):
        quotient(2, 0, [-1, 3])
    with pytest.raises(ValueError):
        quotient(1, 1, [1, 1])


def test_quotient_grad_examples():
    np.testing.assert_allclose(quotient_grad(1, 0, [0.3, 2.0, 5.0]), [1, 1, 1])
    np.testing.assert_allclose(quotient_grad(2, 0, [1, 1, 1]), [2, 2, 2])
    np.testing.assert_allclose(quotient_grad(2, 1, [1, 1, 1]), [1 / 3] * 3)


def test_batched_evaluation():
    lam = np.array([[1, 1, 1], [1, 2, 3.0]])
    np.testing.assert_allclose(sigma(2, lam), [3, 11])
    assert sigma_all(lam, 3).shape == (2, 4)


# -- properties ---------------------------------------------------------------

@given(spectra, st.integers(0, 7))
def test_sigma_matches_subset_expansion(lam, k):
    expected = brute_sigma(k, lam)
    assert sigma(k, lam) == pytest.approx(expected, rel=1e-10, abs=1e-9)


@given(spectra, st.integers(0, 7), st.randoms(use_true_random=False))
def test_sigma_symmetric(lam, k, rnd):
    perm = list(lam)
    rnd.shuffle(perm)
    assert sigma(k, perm) == pytest.approx(sigma(k, lam), rel=1e-12, abs=1e-10)


@given(spectra)
def test_recursion_and_minor_sum(lam):
    n = len(lam)
    s = sigma_all(lam, n)
    for k in range(1, n + 1):
        rhs = sigma_minors(k, lam) + lam * sigma_minors(k - 1, lam)
        scale = max(1.0, np.abs(rhs).max(), abs(s[k]))
        np.testing.assert_allclose(rhs, s[k], atol=1e-12 * scale * n)
        total = sigma_minors(k - 1, lam).sum()
        assert total == pytest.approx((n - k + 1) * s[k - 1], rel=1e-10, abs=1e-9 * scale)


@given(spectra)
def test_minor_is_deletion(lam):
    for i in range(len(lam)):
        rest = np.delete(lam, i)
        for k in range(len(lam)):
            assert sigma_minor(k, lam, i) == pytest.approx(sigma(k, rest), rel=1e-10, abs=1e-9)


@given(spectra)
def test_nesting(lam):
    flags = [in_gamma(lam, j) for j in range(1, len(lam) + 1)]
    for j in range(1, len(flags)):
        assert not flags[j] or flags[j - 1]


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.data())
def test_quotient_grad_matches_finite_differences(seed, n, data):
    k = data.draw(st.integers(1, n))
    l = data.draw(st.integers(0, k - 1))
    lam = cone_point(np.random.default_rng(seed), n, k)
    grad = quotient_grad(k, l, lam)
    for i in range(n):
        h = 1e-6 * (1 + abs(lam[i]))
        e = np.zeros(n)
        e[i] = h
        if not (in_gamma(lam + e, k) and in_gamma(lam - e, k)):
            continue
        fd = (quotient(k, l, lam + e) - quotient(k, l, lam - e)) / (2 * h)
        assert fd == pytest.approx(grad[i], rel=1e-7, abs=1e-7 * np.abs(grad).max())


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.data())
def test_cone_inequalities(seed, n, data):
    rng = np.random.default_rng(seed)
    k = data.draw(st.integers(1, n))
    l = data.draw(st.integers(0, k - 1))
    lam = cone_point(rng, n, k)
    mu = cone_point(rng, n, k)
    f = lambda x: quotient(k, l, x) ** (1 / (k - l))  # noqa: E731
    # (ii) positivity of minors
    assert np.all(sigma_minors(k - 1, lam) > 0)
    # (iv) trace lower bound
    q = quotient(k, l, lam)
    gsum = (quotient_grad(k, l, lam) * q ** (1 / (k - l)) / ((k - l) * q)).sum()
    assert gsum >= (comb(n, k) / comb(n, l)) ** (1 / (k - l)) - 1e-10
    # (v) concavity at midpoints
    assert f(0.5 * (lam + mu)) >= 0.5 * (f(lam) + f(mu)) - 1e-10
    # (vi) ordering of minors for a sorted spectrum
    desc = np.sort(lam)[::-1]
    minors = sigma_minors(k - 1, desc)
    assert np.all(np.diff(minors) >= -1e-10 * max(1.0, np.abs(minors).max()))


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.data())
def test_newton_maclaurin(seed, n, data):
    m = data.draw(st.integers(1, n))
    lam = cone_point(np.random.default_rng(seed), n, m)
    s = sigma_all(lam, m)
    norm = [s[j] / comb(n, j) for j in range(m + 1)]
    for mm, ll, r, ss in itertools.product(range(m + 1), repeat=4):
        if mm > ll >= 0 and r > ss >= 0 and mm >= r and ll >= ss:
            lhs = (norm[mm] / norm[ll]) ** (1 / (mm - ll))
            rhs = (norm[r] / norm[ss]) ** (1 / (r - ss))
            assert lhs <= rhs + 1e-10 * max(1.0, rhs)
