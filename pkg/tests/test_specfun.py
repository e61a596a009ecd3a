"""Special functions and truncation bounds against independent oracles."""

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from qspcap.specfun import (
    DomainError,
    PrecisionContext,
    PrecisionExhausted,
    bessel_j,
    bessel_j_array,
    context_for_depth,
    eps_asy,
    eps_num,
    gamma0,
    required_depth,
    struve_h,
)

CTX = PrecisionContext(mantissa_bits=160, target_epsilon=1e-40)


def series_bessel(k, tau, dps=60):
    """Independent oracle: direct power series at doubled precision."""
    with mpmath.workdps(dps):
        t = mp.mpf(tau)
        half = t / 2
        total = mp.mpf(0)
        for j in range(200):
            term = (-1) ** j * half ** (2 * j + k) / (mp.factorial(j) * mp.factorial(j + k))
            total += term
            if j > 10 and abs(term) < mp.mpf(10) ** (-dps - 5):
                break
        return total


class TestBessel:
    def test_j0_at_zero(self):
        assert bessel_j(0, 0.0, CTX) == 1.0

    def test_jk_at_zero(self):
        assert bessel_j(3, 0.0, CTX) == 0.0

    def test_against_series_oracle(self):
        with mpmath.workdps(60):
            for k, tau in [(1, 2.0), (0, 5.5), (7, 3.25), (12, 9.0)]:
                got = bessel_j(k, tau, CTX)
                want = series_bessel(k, tau)
                assert abs(got - want) < CTX.target_epsilon * 10

    def test_against_mpmath(self):
        with mpmath.workdps(50):
            for k, tau in [(2, 7.0), (20, 4.0), (33, 16.0)]:
                got = bessel_j(k, tau, CTX)
                want = mpmath.besselj(k, mp.mpf(tau))
                assert abs(got - want) < mp.mpf(10) ** -40

    @given(k=st.integers(min_value=-12, max_value=12),
           tau=st.floats(min_value=0.0, max_value=24.0, allow_nan=False))
    @settings(max_examples=30, deadline=None)
    def test_parity_identity(self, k, tau):
        a = bessel_j(-k, tau, CTX)
        b = (-1) ** k * bessel_j(k, tau, CTX)
        assert a == b  # parity is applied exactly, not re-derived

    def test_precision_exhausted(self):
        ctx = PrecisionContext(mantissa_bits=64, target_epsilon=1e-60)
        with pytest.raises(PrecisionExhausted):
            bessel_j(1, 2.0, ctx)


class TestStruve:
    def test_zero_argument(self):
        assert struve_h(0, 0.0, CTX) == 0.0
        assert struve_h(1, 0.0, CTX) == 0.0

    def test_against_mpmath_oracle(self):
        with mpmath.workdps(60):
            for k, tau in [(0, 1.5), (1, 1.5), (0, 18.0), (1, 44.0)]:
                got = struve_h(k, tau, CTX)
                want = mpmath.struveh(k, mp.mpf(tau))
                assert abs(got - want) < mp.mpf(10) ** -38

    def test_order_restriction(self):
        with pytest.raises(DomainError):
            struve_h(2, 1.0, CTX)


class TestGamma0:
    def test_empty_integral(self):
        assert gamma0(0.0, CTX) == 0.0

    @pytest.mark.parametrize("tau", [2.0, 10.0])
    def test_quadrature_oracle(self, tau):
        with mpmath.workdps(40):
            want = mpmath.quad(lambda t: mpmath.besselj(0, t), [0, mp.mpf(tau)])
            got = gamma0(tau, CTX)
            assert abs(got - want) < 1e-12

    def test_agrees_with_quadrature_up_to_64(self):
        for tau in (1.0, 17.0, 64.0):
            with mpmath.workdps(40):
                want = mpmath.quad(lambda t: mpmath.besselj(0, t), [0, mp.mpf(tau)])
            assert abs(gamma0(tau, CTX) - want) < 1e-10


class TestEpsAsy:
    def test_zero_tau(self):
        assert eps_asy(0.0, 8) == 0.0

    def test_exact_rational_oracle(self):
        # compare eps_asy(4, 16)^2 against exact rational arithmetic
        tau, m = 4.0, 16
        q = m // 2 + 1
        ft = Fraction(tau)
        fact = math.factorial(q)
        sq = (Fraction(8) * (ft / 2) ** q / (3 * fact)) ** 2 * (1 + (ft / m) ** 2)
        got_sq = float(eps_asy(tau, m)) ** 2
        assert abs(got_sq - float(sq)) <= 1e-12 * float(sq)

    def test_monotone_in_m(self):
        for tau in (1.0, 4.0, 9.0):
            m = 2 * math.ceil(tau) + 2
            vals = [eps_asy(tau, m + 2 * i) for i in range(6)]
            assert all(vals[i + 1] < vals[i] for i in range(5))

    def test_domain_guard(self):
        with pytest.raises(DomainError):
            eps_asy(8.0, 14)
        with pytest.raises(DomainError):
            eps_asy(2.0, 7)  # odd


def brute_force_eps_ja(tau, m, grid=10_000):
    """Oracle: dense-grid maximization of the Jacobi-Anger truncation error."""
    theta = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    ks = np.arange(-(m // 2), m // 2 + 1)
    jk = scipy.special.jv(ks, tau)
    partial = np.exp(1j * np.outer(theta, ks)) @ jk.astype(complex)
    return float(np.max(np.abs(partial - np.exp(1j * tau * np.sin(theta)))))


class TestEpsNum:
    def test_zero_tau(self):
        assert eps_num(0.0, 8) == 0.0

    def test_bound_ordering_at_8_32(self):
        e_ja = brute_force_eps_ja(8.0, 32)
        e_num = float(eps_num(8.0, 32))
        e_asy = float(eps_asy(8.0, 32))
        assert e_ja <= e_num <= e_asy

    def test_monotone_nonincreasing_in_m(self):
        for tau in (2.0, 6.0):
            m0 = 2 * math.ceil(tau) + 4
            vals = [float(eps_num(tau, m0 + 2 * i)) for i in range(8)]
            assert all(vals[i + 1] <= vals[i] + 1e-300 for i in range(7))

    def test_nondecreasing_in_tau(self):
        m = 32
        vals = [float(eps_num(tau, m)) for tau in (2.0, 4.0, 8.0, 12.0, 16.0)]
        assert all(vals[i + 1] >= vals[i] for i in range(4))

    def test_domain_guard(self):
        with pytest.raises(DomainError):
            eps_num(10.0, 18)


class TestRequiredDepth:
    def test_tau_zero(self):
        assert required_depth(0.0, 1e-3) == 2

    def test_minimality(self):
        for tau, eps in [(2.0, 1e-4), (5.0, 1e-6), (11.0, 1e-3)]:
            m = required_depth(tau, eps)
            assert float(eps_num(tau, m)) <= eps
            if m > max(2 * math.ceil(tau), 2):
                assert float(eps_num(tau, m - 2)) > eps

    def test_first_order_slope(self):
        # m ~ 2 tau to first order: the slope of m against tau sits in
        # [1.9, 2.6].  (The pointwise ratio m/tau is 3.0 at tau=16 because
        # the additive accuracy term has not yet amortized -- the dense-grid
        # truncation-error oracle itself requires m=48 there.)
        ms = {tau: required_depth(tau, 1e-3) for tau in (16.0, 64.0, 256.0)}
        taus = sorted(ms)
        for a, b in zip(taus, taus[1:]):
            slope = (ms[b] - ms[a]) / (b - a)
            assert 1.9 <= slope <= 2.6
        for tau in (64.0, 256.0):
            assert 1.9 <= ms[tau] / tau <= 2.6

    def test_rejects_bad_target(self):
        with pytest.raises(DomainError):
            required_depth(4.0, 1.5)
