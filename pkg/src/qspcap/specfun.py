"""Arbitrary-precision special functions and truncation-error bounds.

Everything downstream of circuit configuration rests on two quantities: the
closed-form asymptotic bound ``eps_asy(tau, m)`` and the tighter numerical
bound ``eps_num(tau, m)`` on the error of the degree-m Fourier approximation
to exp(i*tau*sin(theta)).  Both are built from Bessel functions of the first
kind; the numerical bound additionally needs the Struve functions H0, H1
through the integral Gamma0(tau) = int_0^tau J0.

All functions here are pure and deterministic given (inputs, mantissa_bits),
and return mpmath floats so that values far below double-precision underflow
(routine for large m) survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
from mpmath import mp

__all__ = [
    "PrecisionContext",
    "PrecisionExhausted",
    "DomainError",
    "context_for_depth",
    "bessel_j",
    "bessel_j_array",
    "struve_h",
    "gamma0",
    "eps_asy",
    "eps_num",
    "required_depth",
]

# Extra working bits beyond the context's mantissa, absorbing recurrence and
# summation roundoff.
_GUARD_BITS = 32


class PrecisionExhausted(ArithmeticError):
    """Requested accuracy is not attainable at the context's mantissa width."""


class DomainError(ValueError):
    """Arguments outside the validity region (m even, m >= 2*tau)."""


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision and accuracy goal for one computation.

    mantissa_bits is the binary mantissa width used for intermediates;
    target_epsilon is the dimensionless accuracy the caller wants out.
    """

    mantissa_bits: int = 128
    target_epsilon: float = 1e-30

    def __post_init__(self) -> None:
        if self.mantissa_bits < 64:
            raise ValueError(f"mantissa_bits must be >= 64, got {self.mantissa_bits}")
        if not self.target_epsilon > 0:
            raise ValueError("target_epsilon must be positive")

    def check_attainable(self) -> None:
        # A result cannot be resolved below one ulp at the working mantissa.
        if self.target_epsilon < 2.0 ** (-(self.mantissa_bits - 8)):
            raise PrecisionExhausted(
                f"target_epsilon={self.target_epsilon} unattainable at "
                f"{self.mantissa_bits} mantissa bits"
            )

    def workprec(self, extra: int = 0):
        return mpmath.workprec(self.mantissa_bits + _GUARD_BITS + extra)


def context_for_depth(m: int, eps_hint: float = 1e-30) -> PrecisionContext:
    """Default context for query depth m: mantissa max(128, 2m + 64).

    Coefficient precision O(eps/m) and root precision 2^-m * eps / m are
    needed downstream of these values, hence the linear-in-m width.
    """
    return PrecisionContext(mantissa_bits=max(128, 2 * m + 64), target_epsilon=eps_hint)


def _require_even_depth(tau: float, m: int) -> None:
    if m % 2 != 0 or m < 2:
        raise DomainError(f"query depth must be a positive even integer, got {m}")
    if m < 2 * abs(tau):
        raise DomainError(f"bounds valid only for m >= 2*tau (m={m}, tau={tau})")


def bessel_j_array(kmax: int, tau, ctx: PrecisionContext | None = None) -> list:
    """J_0(tau) .. J_kmax(tau) by Miller's backward recurrence.

    The recurrence J_{j-1} = (2j/tau) J_j - J_{j+1} is run downward from a
    start order high enough that the seed's truncation error is below one ulp,
    then normalized with J_0 + 2*sum_{j even >= 2} J_j = 1.  Stable in the
    k ~ m/2 >> tau regime the bounds need, where upward recurrence explodes.
    """
    ctx = ctx or PrecisionContext()
    ctx.check_attainable()
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    with ctx.workprec():
        t = mp.mpf(tau)
        if t < 0:
            # J_k(-t) = (-1)^k J_k(t)
            pos = bessel_j_array(kmax, -tau, ctx)
            return [pos[k] if k % 2 == 0 else -pos[k] for k in range(kmax + 1)]
        if t == 0:
            return [mp.mpf(1)] + [mp.mpf(0)] * kmax

        prec = ctx.mantissa_bits + _GUARD_BITS
        # Start order: (t/2)^M / M! < 2^-(prec + pad), found via Stirling in
        # doubles (overshoot is harmless).
        target = -(prec + 16) * math.log(2.0)
        tf = float(t)
        M = max(kmax + 4, int(math.ceil(tf)) + 4, 8)
        while M * math.log(tf / 2.0 + 1e-300) - math.lgamma(M + 1) > target:
            M += max(4, M // 8)
        if M % 2:
            M += 1

        f_next = mp.mpf(0)  # order M+1
        f_cur = mp.mpf("1e-50")  # arbitrary seed at order M
        out = [mp.mpf(0)] * (kmax + 1)
        even_sum = mp.mpf(0)
        for j in range(M, 0, -1):
            if j <= kmax:
                out[j] = f_cur
            if j % 2 == 0:
                even_sum += f_cur
            f_prev = (2 * j / t) * f_cur - f_next
            f_next, f_cur = f_cur, f_prev
        out[0] = f_cur
        norm = f_cur + 2 * even_sum
        return [v / norm for v in out]


def bessel_j(k: int, tau, ctx: PrecisionContext | None = None):
    """Bessel function of the first kind, integer order (any sign)."""
    sign = -1 if (k < 0 and k % 2 != 0) else 1
    val = bessel_j_array(abs(k), tau, ctx)[abs(k)]
    return sign * val


def struve_h(k: int, tau, ctx: PrecisionContext | None = None):
    """Struve function H_k(tau) for k in {0, 1}, by direct power series.

    The series alternates with terms peaking near exp(tau), so the working
    precision is padded by ~1.443*tau bits to absorb the cancellation.
    """
    if k not in (0, 1):
        raise DomainError(f"struve_h supports orders 0 and 1 only, got {k}")
    ctx = ctx or PrecisionContext()
    ctx.check_attainable()
    cancel_bits = int(1.4427 * abs(float(tau))) + 16
    with ctx.workprec(extra=cancel_bits):
        t = mp.mpf(tau)
        if t == 0:
            return mp.mpf(0)
        half = t / 2
        # H_k(t) = sum_j (-1)^j (t/2)^(2j+k+1) / (Gamma(j+3/2) Gamma(j+k+3/2))
        term_pref = half ** (k + 1)
        total = mp.mpf(0)
        j = 0
        g1 = mp.gamma(mp.mpf(3) / 2)
        g2 = mp.gamma(k + mp.mpf(3) / 2)
        term = term_pref / (g1 * g2)
        tiny = mp.mpf(2) ** (-(ctx.mantissa_bits + _GUARD_BITS))
        scale = abs(term)
        while True:
            total += term
            scale = max(scale, abs(term))
            # ratio of term j+1 to term j
            ratio = -(half * half) / ((j + mp.mpf(3) / 2) * (j + k + mp.mpf(3) / 2))
            term *= ratio
            j += 1
            if abs(term) < tiny * max(scale, mp.mpf(1)) and abs(ratio) < 1:
                break
            if j > 100000:
                raise PrecisionExhausted("struve series failed to converge")
        return +total


def gamma0(tau, ctx: PrecisionContext | None = None):
    """Gamma0(tau) = int_0^tau J_0 = tau*J0 + (pi*tau/2)*(J1*H0 - J0*H1)."""
    if float(tau) < 0:
        raise DomainError("gamma0 requires tau >= 0")
    ctx = ctx or PrecisionContext()
    with ctx.workprec():
        t = mp.mpf(tau)
        if t == 0:
            return mp.mpf(0)
        js = bessel_j_array(1, tau, ctx)
        h0 = struve_h(0, tau, ctx)
        h1 = struve_h(1, tau, ctx)
        return t * js[0] + (mp.pi * t / 2) * (js[1] * h0 - js[0] * h1)


def eps_asy(tau, m: int):
    """Closed-form asymptotic bound on the degree-m Fourier truncation error.

    eps_asy = (8 |tau/2|^(m/2+1) / (3 (m/2+1)!)) * sqrt(1 + |tau/m|^2),
    with the factorial computed exactly.  Valid for even m >= 2*tau.
    """
    _require_even_depth(tau, m)
    with mpmath.workprec(max(128, 2 * m + 64)):
        t = abs(mp.mpf(tau))
        if t == 0:
            return mp.mpf(0)
        q = m // 2 + 1
        lead = 8 * (t / 2) ** q / (3 * mp.factorial(q))
        return lead * mp.sqrt(1 + (t / m) ** 2)


def eps_num(tau, m: int, ctx: PrecisionContext | None = None):
    """Numerically exact bound on the degree-m Fourier truncation error.

    Computed from the excised Jacobi-Anger tails, folded into finite sums via
    sum_{even k} J_k = 1 and 2*sum_{odd k > 0} J_k = Gamma0:

        eps_a = |1 - J0 - 2 * sum_{even j, 2 <= j <= m/2} J_j|
        eps_c = |Gamma0 - 2 * sum_{odd j, 1 <= j <= m/2} J_j|
        eps_num = sqrt(eps_a^2 + eps_c^2)

    The sums run over every retained order of either parity up to m/2, which
    reduces to the k = 1..m/4 index form when m is a multiple of 4 and keeps
    the identity exact for m = 2 mod 4.  For m >= 2*tau all excised orders sit
    inside the Bessel functions' first root, making the tail folding exact.
    """
    _require_even_depth(tau, m)
    ctx = ctx or context_for_depth(m)
    with ctx.workprec():
        t = mp.mpf(abs(tau))
        if t == 0:
            return mp.mpf(0)
        half = m // 2
        js = bessel_j_array(half, t, ctx)
        even_sum = mp.fsum(js[j] for j in range(2, half + 1, 2))
        odd_sum = mp.fsum(js[j] for j in range(1, half + 1, 2))
        g0 = gamma0(t, ctx)
        eps_a = abs(1 - js[0] - 2 * even_sum)
        eps_c = abs(g0 - 2 * odd_sum)
        return mp.sqrt(eps_a * eps_a + eps_c * eps_c)


def required_depth(tau, eps_target: float) -> int:
    """Smallest even m >= max(2*ceil(tau), 2) with eps_num(tau, m) <= eps_target.

    Bisection on even integers, exploiting the monotone decrease of eps_num
    in m; the super-exponential convergence keeps the bracketing loop short.
    """
    if not (0 < eps_target < 1):
        raise DomainError(f"eps_target must be in (0, 1), got {eps_target}")
    t = float(tau)
    if t < 0:
        raise DomainError("required_depth needs tau >= 0")
    m_lo = max(2 * math.ceil(t), 2)
    if m_lo % 2:
        m_lo += 1

    def ok(m: int) -> bool:
        ctx = context_for_depth(m, eps_hint=min(1e-30, eps_target))
        return eps_num(tau, m, ctx) <= eps_target

    if ok(m_lo):
        return m_lo
    # Exponential bracket then even-integer bisection.
    step = 2
    hi = m_lo + step
    while not ok(hi):
        step *= 2
        hi += step
    lo = max(m_lo, hi - step)  # largest known-failing point is below hi
    while hi - lo > 2:
        mid = lo + ((hi - lo) // 4) * 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
