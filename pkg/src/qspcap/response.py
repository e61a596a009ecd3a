"""Fourier response synthesis and phase-sequence computation.

Pipeline: Bessel coefficients f_k = J_k(tau)/(1+eps) define the degree-m
response F(theta) = sum f_k e^{ik theta} ~ e^{i tau sin theta}.  A real
complementary coefficient set g_k with |F|^2 + |G|^2 = 1 on the unit circle
is found by spectral factorization of the Laurent polynomial 1 - F(z)F(1/z);
the parity f_{-k} = (-1)^k f_k turns that into an ordinary degree-m
polynomial in u = z^2, whose roots are isolated with a multiprecision
Aberth iteration.  The phases phi_0..phi_m are then peeled off the (F, G)
pair one rotation at a time.

The response-operator convention used throughout (and reconstructed by
verify_phases) is, in the X eigenbasis {|+>, |->} of the signal qubit,

    Q(theta) = A(phi_m) D_m A(phi_{m-1}) D_{m-1} ... D_1 A(phi_0),

with A(phi) = [[cos(phi/2), -i sin(phi/2)], [-i sin(phi/2), cos(phi/2)]]
(an Rz in the Z basis) and D_p = diag(w*, w) for odd query position p,
diag(w, w*) for even p, where w = e^{i theta/2}.  Then <+|Q|+> = F(theta).
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field

import mpmath
import numpy as np
from mpmath import mp

from .specfun import (
    DomainError,
    PrecisionContext,
    bessel_j_array,
    context_for_depth,
    eps_num,
)

__all__ = [
    "FourierResponse",
    "ComplementaryCoeffs",
    "PhaseSequence",
    "SynthesisError",
    "RootFindingError",
    "DegreeReductionStall",
    "fourier_coefficients",
    "complementary_polynomial",
    "compute_phases",
    "verify_phases",
    "synthesize_phases",
    "PhaseCache",
]


class SynthesisError(ArithmeticError):
    pass


class RootFindingError(SynthesisError):
    pass


class DegreeReductionStall(SynthesisError):
    pass


@dataclass
class FourierResponse:
    """Degree-m response coefficients f_k, k = -m/2 .. m/2 (index k + m/2)."""

    tau: float
    m: int
    eps_baked: object  # mpf
    coeffs: list  # m+1 mpf values

    def coeff(self, k: int):
        return self.coeffs[k + self.m // 2]

    def evaluate_grid(self, thetas: np.ndarray) -> np.ndarray:
        """F(theta) on a grid, in double precision."""
        ks = np.arange(-(self.m // 2), self.m // 2 + 1)
        fk = np.array([float(c) for c in self.coeffs])
        return np.exp(1j * np.outer(thetas, ks)) @ fk.astype(complex)


@dataclass
class ComplementaryCoeffs:
    """Real coefficients g_k with |F|^2 + |G|^2 = 1 on the unit circle."""

    m: int
    coeffs: list  # m+1 mpf values

    def evaluate_grid(self, thetas: np.ndarray) -> np.ndarray:
        ks = np.arange(-(self.m // 2), self.m // 2 + 1)
        gk = np.array([float(c) for c in self.coeffs])
        return np.exp(1j * np.outer(thetas, ks)) @ gk.astype(complex)


@dataclass
class PhaseSequence:
    """Phases phi_0..phi_m realizing the response, plus provenance.

    odd_axis_substitution records that circuit assembly must trade the
    odd-index Z rotations for Y rotations to cancel the qubitized walk
    operator's imaginary eigenphase; the 2x2 verification here is agnostic
    to it.
    """

    phases: list  # m+1 mpf values
    tau: float
    m: int
    eps_baked: object
    verification_residual: float = float("nan")
    odd_axis_substitution: bool = True

    def phases_float(self) -> np.ndarray:
        return np.array([float(p) for p in self.phases])


def synthesis_tolerance(eps_baked, m: int) -> float:
    """Acceptance tolerance ladder: eps_baked / (100 m), floored near ulp."""
    return max(float(eps_baked) / (100.0 * max(m, 1)), 1e-13)


def verification_grid_size(m: int) -> int:
    return max(4096, 64 * m)


def fourier_coefficients(
    tau: float, m: int, ctx: PrecisionContext | None = None
) -> FourierResponse:
    """f_k = J_k(tau) / (1 + eps_num(tau, m)) for k in [-m/2, m/2]."""
    ctx = ctx or context_for_depth(m)
    eps = eps_num(tau, m, ctx)  # validates m even, m >= 2 tau
    with ctx.workprec():
        js = bessel_j_array(m // 2, tau, ctx)
        scale = 1 / (1 + eps)
        half = m // 2
        coeffs = [mp.mpf(0)] * (m + 1)
        for k in range(0, half + 1):
            val = js[k] * scale
            coeffs[half + k] = val
            coeffs[half - k] = val if k % 2 == 0 else -val
        return FourierResponse(tau=float(tau), m=m, eps_baked=eps, coeffs=coeffs)


def _laurent_char_poly(f: FourierResponse):
    """Coefficients q_0..q_m of Q(u) = u^{m/2} (1 - F(z)F(-z)) |_{u=z^2}.

    F(1/z) = F(-z) by the coefficient parity, so 1 - F(z)F(1/z) is even in z
    and halves to a degree-m polynomial in u = z^2.
    """
    m = f.m
    a = f.coeffs
    b = [(-1) ** (j - m // 2) * a[j] for j in range(m + 1)]
    conv = [mp.mpf(0)] * (2 * m + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            conv[i + j] += ai * bj
    c = [-v for v in conv]
    c[m] += 1
    # Odd z-powers must vanish identically.
    odd_mag = max((abs(c[i]) for i in range(1, 2 * m + 1, 2)), default=mp.mpf(0))
    scale = max((abs(v) for v in c), default=mp.mpf(1))
    if scale > 0 and odd_mag > mp.mpf(2) ** (-mp.prec // 2) * scale:
        raise SynthesisError("characteristic polynomial lost its even parity")
    return [c[2 * j] for j in range(m + 1)]


def _aberth_roots(coeffs, prec_bits: int, tol_bits: int, max_iter: int = 400):
    """All complex roots of a polynomial (coeffs low->high) by Aberth-Ehrlich
    simultaneous iteration, with residual certification.
    """
    n = len(coeffs) - 1
    if n <= 0:
        return []
    with mpmath.workprec(prec_bits):
        cs = [mp.mpc(c) for c in coeffs]
        lead = cs[-1]
        mon = [c / lead for c in cs]

        def poly_and_deriv(z):
            p = mp.mpc(0)
            dp = mp.mpc(0)
            for c in reversed(mon):
                dp = dp * z + p
                p = p * z + c
            return p, dp

        # Initial guesses: perturbed circle at the root-magnitude scale.
        r0 = abs(mon[0]) ** (mp.mpf(1) / n) if mon[0] != 0 else mp.mpf("0.5")
        r0 = max(min(r0, mp.mpf(1e6)), mp.mpf(1e-6))
        roots = [
            r0 * mp.exp(mp.mpc(0, 2 * mp.pi * (k + mp.mpf("0.35")) / n + mp.mpf("0.4")))
            for k in range(n)
        ]
        stop = mp.mpf(2) ** (-tol_bits)
        for _ in range(max_iter):
            max_step = mp.mpf(0)
            for i in range(n):
                p, dp = poly_and_deriv(roots[i])
                if p == 0:
                    continue
                if dp == 0:
                    roots[i] += stop
                    continue
                w = p / dp
                s = mp.mpc(0)
                for j in range(n):
                    if j != i:
                        diff = roots[i] - roots[j]
                        if diff == 0:
                            diff = mp.mpf(2) ** (-prec_bits // 2)
                        s += 1 / diff
                denom = 1 - w * s
                if denom == 0:
                    step = w
                else:
                    step = w / denom
                roots[i] -= step
                max_step = max(max_step, abs(step))
            if max_step < stop:
                break
        # Residual certification: |p(z)| small against a condition-aware scale.
        for z in roots:
            p, _ = poly_and_deriv(z)
            scale = mp.fsum(abs(c) * abs(z) ** k for k, c in enumerate(mon))
            if abs(p) > mp.mpf(2) ** (-tol_bits // 2) * max(scale, mp.mpf(1e-30)):
                raise RootFindingError(
                    f"uncertified root: residual {mp.nstr(abs(p), 8)} at |z|={mp.nstr(abs(z), 8)}"
                )
        return roots


def complementary_polynomial(
    f: FourierResponse, ctx: PrecisionContext | None = None
) -> ComplementaryCoeffs:
    """Spectral factorization: real g_k with F(z)F(1/z) + G(z)G(1/z) = 1.

    Roots of the halved characteristic polynomial come in (u, 1/u) pairs;
    the factor G takes the m/2 roots inside the unit disk (one of each
    conjugate pair for on-circle double roots), assembled as
    G(z) = gamma * z^{-m/2} * prod (z^2 - u_i).
    """
    m = f.m
    ctx = ctx or context_for_depth(m)
    with ctx.workprec(extra=64):
        q = _laurent_char_poly(f)
        scale = max(abs(v) for v in q)
        half = m // 2
        if scale == 0 or scale < mp.mpf(2) ** (-(ctx.mantissa_bits - 8)):
            # Identity-like response: |F| = 1 exactly, G = 0.
            return ComplementaryCoeffs(m=m, coeffs=[mp.mpf(0)] * (m + 1))
        prec = ctx.mantissa_bits + 64
        tol_bits = max(ctx.mantissa_bits // 2, m + int(-mp.log(float(f.eps_baked) + 1e-300, 2)) // 2)
        # Exact-zero edge coefficients: leading zeros are roots at infinity
        # (outside, excluded); trailing zeros are u = 0 roots (inside).
        zero_tol = scale * mp.mpf(2) ** (-(ctx.mantissa_bits - 8))
        qt = list(q)
        while len(qt) > 1 and abs(qt[-1]) <= zero_tol:
            qt.pop()
        zero_roots = 0
        while len(qt) > 1 and abs(qt[0]) <= zero_tol:
            qt.pop(0)
            zero_roots += 1
        roots = [mp.mpc(0)] * zero_roots + _aberth_roots(qt, prec, min(tol_bits, prec - 16))
        inside = sorted(roots, key=lambda u: abs(u))[:half]
        if len(inside) != half:
            raise RootFindingError("could not select an inside-disk root set")
        # Assemble B(v) = prod (v - u_i); the set is conjugation-closed so
        # the coefficients must come out real.
        b = _poly_from_roots(inside)
        imag_mag = max(abs(v.imag) for v in b)
        real_scale = max(max(abs(v.real) for v in b), mp.mpf(1e-300))
        if imag_mag > mp.mpf(2) ** (-ctx.mantissa_bits // 3) * real_scale:
            raise RootFindingError("root set not conjugation-closed")
        breal = [v.real for v in b]
        # gamma from P(z0) = G(z0) G(1/z0) at a circle point away from roots.
        best = None
        for ang in (0.0, 0.5, 1.0, 1.7, 2.3):
            z0 = mp.exp(mp.mpc(0, ang))
            bval = _eval_poly(breal, z0 * z0)
            if best is None or abs(bval) > best[1]:
                best = (ang, abs(bval), z0, bval)
        ang, _, z0, bval = best
        p_at = _eval_laurent_sym(q, m, z0)
        gamma_sq = p_at / (bval * mp.conj(bval))
        if abs(gamma_sq.imag) > 1e-20 * abs(gamma_sq) + mp.mpf(2) ** (-ctx.mantissa_bits // 2):
            raise RootFindingError("factorization normalization not real")
        gs = gamma_sq.real
        if gs < 0:
            raise RootFindingError("negative factorization normalization")
        gamma = mp.sqrt(gs)
        coeffs = [mp.mpf(0)] * (m + 1)
        for t, bt in enumerate(breal):
            coeffs[2 * t] = gamma * bt  # z-degree 2t - m/2 at index 2t
        return ComplementaryCoeffs(m=m, coeffs=coeffs)


def _poly_from_roots(roots):
    b = [mp.mpc(1)]
    for u in roots:
        nxt = [mp.mpc(0)] * (len(b) + 1)
        for i, c in enumerate(b):
            nxt[i + 1] += c
            nxt[i] -= u * c
        b = nxt
    return b


def _eval_poly(coeffs, z):
    acc = mp.mpc(0)
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def _eval_laurent_sym(q, m, z):
    """Evaluate P(z) = z^{-m} * sum q_j z^{2j} at z on the unit circle."""
    acc = mp.mpc(0)
    z2 = z * z
    for c in reversed(q):
        acc = acc * z2 + c
    return acc * z ** (-m)


def compute_phases(
    f: FourierResponse,
    g: ComplementaryCoeffs,
    ctx: PrecisionContext | None = None,
) -> PhaseSequence:
    """Peel phi_m..phi_0 off the (F, G) pair, one rotation per step.

    At step j the leading (odd j) or trailing (even j) half-degree
    coefficient pair fixes phi_j; stripping the rotation and one signal
    factor reduces both Laurent half-degrees by one.  The discarded edge
    coefficient on the complementary side must cancel by the unitarity
    identity — if it does not, the working precision was insufficient.
    """
    m = f.m
    ctx = ctx or context_for_depth(m)
    with ctx.workprec(extra=64):
        # Arrays over w-degrees -j..j (step 2), w = e^{i theta/2}; start at
        # j = m where degree 2k corresponds to z-degree k.
        half = m // 2
        F = list(f.coeffs)  # index i <-> w-degree 2i - m... see below
        G = list(g.coeffs)
        # Represent as lists idx 0..j over degrees (-j, -j+2, .., j):
        # at j = m, idx i <-> w-degree 2i - m <-> z-degree i - m/2: matches.
        phases = [mp.mpf(0)] * (m + 1)
        stall_tol = mp.mpf(2) ** (-(ctx.mantissa_bits // 2))

        def unit_scale(vals):
            return max(max(abs(v) for v in vals), mp.mpf(1e-300))

        for j in range(m, 0, -1):
            if j % 2 == 0:
                fb, gb = F[0], G[0]
                phi = 2 * mp.atan2(fb, gb)
            else:
                ft, gt = F[-1], G[-1]
                phi = 2 * mp.atan2(ft, gt)
            phases[j] = phi
            c = mp.cos(phi / 2)
            s = mp.sin(phi / 2)
            tf = [c * F[i] - s * G[i] for i in range(j + 1)]
            tg = [s * F[i] + c * G[i] for i in range(j + 1)]
            if j % 2 == 0:
                # D(-): tf loses its bottom entry, tg its top.
                edge_f, edge_g = tf[0], tg[-1]
                F = tf[1:]
                G = tg[:-1]
            else:
                # D(+): tf loses its top entry, tg its bottom.
                edge_f, edge_g = tf[-1], tg[0]
                F = tf[:-1]
                G = tg[1:]
            edge = max(abs(edge_f), abs(edge_g))
            if edge > stall_tol * unit_scale(F + G):
                raise DegreeReductionStall(
                    f"degree reduction stalled at step {j}: edge {mp.nstr(edge, 8)}"
                )
        f0, g0 = F[0], G[0]
        norm = f0 * f0 + g0 * g0
        if abs(norm - 1) > mp.mpf(1e-6):
            raise DegreeReductionStall("terminal rotation is not unitary")
        phases[0] = 2 * mp.atan2(-g0, f0)

    seq = PhaseSequence(
        phases=phases,
        tau=f.tau,
        m=m,
        eps_baked=f.eps_baked,
    )
    seq.verification_residual = verify_phases(seq, verification_grid_size(m), target=f)
    return seq


def build_response_operator(
    phases: np.ndarray, thetas: np.ndarray
) -> np.ndarray:
    """Reconstruct Q(theta) as the product of exact 2x2 rotations.

    Returns an array of shape (len(thetas), 2, 2), in the X eigenbasis.
    """
    m = len(phases) - 1
    w = np.exp(0.5j * thetas)
    wc = np.conj(w)
    G = len(thetas)
    out = np.zeros((G, 2, 2), dtype=complex)
    c0, s0 = math.cos(phases[0] / 2), math.sin(phases[0] / 2)
    out[:, 0, 0] = c0
    out[:, 0, 1] = -1j * s0
    out[:, 1, 0] = -1j * s0
    out[:, 1, 1] = c0
    for p in range(1, m + 1):
        if p % 2 == 1:
            d00, d11 = wc, w
        else:
            d00, d11 = w, wc
        # D acts from the left: row 0 scaled by d00, row 1 by d11.
        out[:, 0, 0] *= d00
        out[:, 0, 1] *= d00
        out[:, 1, 0] *= d11
        out[:, 1, 1] *= d11
        cp, sp = math.cos(phases[p] / 2), math.sin(phases[p] / 2)
        r00 = cp * out[:, 0, 0] + (-1j * sp) * out[:, 1, 0]
        r01 = cp * out[:, 0, 1] + (-1j * sp) * out[:, 1, 1]
        r10 = (-1j * sp) * out[:, 0, 0] + cp * out[:, 1, 0]
        r11 = (-1j * sp) * out[:, 0, 1] + cp * out[:, 1, 1]
        out[:, 0, 0], out[:, 0, 1], out[:, 1, 0], out[:, 1, 1] = r00, r01, r10, r11
    return out


def verify_phases(
    p: PhaseSequence, grid_size: int | None = None, target: FourierResponse | None = None
) -> float:
    """Max over a theta grid of |<+|Q(theta)|+> - F(theta)|."""
    grid_size = grid_size or verification_grid_size(p.m)
    thetas = np.linspace(0.0, 2.0 * np.pi, grid_size, endpoint=False)
    q = build_response_operator(p.phases_float(), thetas)
    if target is None:
        target = fourier_coefficients(p.tau, p.m)
    fvals = target.evaluate_grid(thetas)
    return float(np.max(np.abs(q[:, 0, 0] - fvals)))


def synthesize_phases(
    tau: float,
    m: int,
    ctx: PrecisionContext | None = None,
    cache: "PhaseCache | None" = None,
) -> PhaseSequence:
    """End-to-end phase synthesis for (tau, m), with optional disk cache."""
    if cache is not None:
        hit = cache.get(tau, m)
        if hit is not None:
            return hit
    ctx = ctx or context_for_depth(m)
    f = fourier_coefficients(tau, m, ctx)
    g = complementary_polynomial(f, ctx)
    seq = compute_phases(f, g, ctx)
    tol = synthesis_tolerance(seq.eps_baked, m)
    if not (seq.verification_residual <= max(tol, 1e-9)):
        raise SynthesisError(
            f"verification residual {seq.verification_residual} exceeds tolerance {tol}"
        )
    if cache is not None:
        cache.put(seq)
    return seq


# ---------------------------------------------------------------------------
# Phase cache: one file per (tau, m) key, decimal values at full precision.

_CACHE_ENV = "QSPCAP_PHASE_CACHE"
_FORMAT_VERSION = 1


class CorruptCacheEntry(Exception):
    pass


class PhaseCache:
    """Disk cache of phase sequences, keyed by the exact decimal rendering
    of (tau, m, eps_baked).  Writes are atomic (temp file + rename), so
    concurrent writers of the same key resolve last-writer-wins; corrupt
    entries (checksum mismatch) read as misses.
    """

    def __init__(self, directory: str | None = None):
        directory = directory or os.environ.get(_CACHE_ENV) or os.path.join(
            os.path.expanduser("~"), ".cache", "qspcap", "phases"
        )
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def _path(self, tau: float, m: int) -> str:
        key = f"{repr(float(tau))}_{int(m)}"
        digest = hashlib.sha256(key.encode()).hexdigest()[:16]
        return os.path.join(self.directory, f"phases_m{int(m)}_{digest}.txt")

    @staticmethod
    def _digits_for(prec_bits: int) -> int:
        return int(math.ceil(prec_bits * 0.30103)) + 6

    def put(self, seq: PhaseSequence) -> str:
        bits = context_for_depth(seq.m).mantissa_bits
        digits = self._digits_for(bits)
        with mpmath.workprec(bits):
            lines = [mp.nstr(p, digits, strip_zeros=False) for p in seq.phases]
        body = "\n".join(lines) + "\n"
        checksum = hashlib.sha256(body.encode()).hexdigest()
        header = (
            f"# qspcap phase sequence\n"
            f"format: {_FORMAT_VERSION}\n"
            f"tau: {repr(float(seq.tau))}\n"
            f"m: {seq.m}\n"
            f"eps_baked: {mp.nstr(mp.mpf(seq.eps_baked), digits, strip_zeros=False)}\n"
            f"residual: {repr(float(seq.verification_residual))}\n"
            f"odd_axis_substitution: {int(seq.odd_axis_substitution)}\n"
            f"precision_bits: {bits}\n"
            f"checksum: {checksum}\n"
            f"phases:\n"
        )
        path = self._path(seq.tau, seq.m)
        tmp = path + f".tmp{os.getpid()}"
        with open(tmp, "w") as fh:
            fh.write(header + body)
        os.replace(tmp, path)
        return path

    def get(self, tau: float, m: int) -> PhaseSequence | None:
        path = self._path(tau, m)
        try:
            seq = load_phase_file(path)
        except (FileNotFoundError, CorruptCacheEntry):
            self.misses += 1
            return None
        if seq.m != m or seq.tau != float(tau):
            self.misses += 1
            return None
        self.hits += 1
        return seq


def load_phase_file(path: str) -> PhaseSequence:
    with open(path) as fh:
        raw = fh.read()
    meta: dict[str, str] = {}
    lines = raw.splitlines()
    body_start = None
    for i, line in enumerate(lines):
        if line.startswith("#"):
            continue
        if line.strip() == "phases:":
            body_start = i + 1
            break
        if ":" in line:
            k, v = line.split(":", 1)
            meta[k.strip()] = v.strip()
    if body_start is None or "checksum" not in meta:
        raise CorruptCacheEntry(f"malformed phase file {path}")
    body = "\n".join(lines[body_start:]).strip("\n") + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != meta["checksum"]:
        raise CorruptCacheEntry(f"checksum mismatch in {path}")
    bits = int(meta.get("precision_bits", "128"))
    with mpmath.workprec(bits):
        phases = [mp.mpf(s) for s in body.split()]
        eps = mp.mpf(meta["eps_baked"])
    return PhaseSequence(
        phases=phases,
        tau=float(meta["tau"]),
        m=int(meta["m"]),
        eps_baked=eps,
        verification_residual=float(meta.get("residual", "nan")),
        odd_axis_substitution=bool(int(meta.get("odd_axis_substitution", "1"))),
    )
