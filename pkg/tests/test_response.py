"""Phase synthesis: coefficients, complementary factorization, peeling,
verification, and the disk cache."""

import math

import mpmath
import numpy as np
import pytest
from mpmath import mp

from qspcap.response import (
    CorruptCacheEntry,
    PhaseCache,
    PhaseSequence,
    build_response_operator,
    complementary_polynomial,
    compute_phases,
    fourier_coefficients,
    load_phase_file,
    synthesize_phases,
    verify_phases,
)
from qspcap.specfun import bessel_j, context_for_depth, eps_num


class TestFourierCoefficients:
    def test_identity_response(self):
        f = fourier_coefficients(0.0, 2)
        assert float(f.coeff(0)) == 1.0
        assert float(f.coeff(1)) == 0.0 and float(f.coeff(-1)) == 0.0
        assert float(f.eps_baked) == 0.0

    def test_matches_bessel_oracle(self):
        tau, m = 4.0, 24
        ctx = context_for_depth(m)
        hi = context_for_depth(2 * m)  # doubled precision oracle
        f = fourier_coefficients(tau, m, ctx)
        with mpmath.workprec(2 * hi.mantissa_bits):
            eps = eps_num(tau, m, hi)
            for k in range(-(m // 2), m // 2 + 1):
                want = bessel_j(k, tau, hi) / (1 + eps)
                assert abs(f.coeff(k) - want) < 1e-30

    def test_parity(self):
        f = fourier_coefficients(6.0, 20)
        with mpmath.workprec(300):
            for k in range(1, 11):
                assert f.coeff(-k) == (-1) ** k * f.coeff(k)

    def test_grid_bound(self):
        # max |F| <= 1 with a gap at the eps^2 scale
        f = fourier_coefficients(4.0, 24)
        th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        mags = np.abs(f.evaluate_grid(th))
        assert mags.max() <= 1.0 + 1e-14
        assert mags.max() >= 1.0 - 4 * float(f.eps_baked)


class TestComplementary:
    def test_constant_response(self):
        delta = 1e-3
        f = fourier_coefficients(0.0, 2)
        f.coeffs[1] = mp.mpf(1) - mp.mpf(delta)  # f_0 = 1 - delta
        g = complementary_polynomial(f)
        th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        G = g.evaluate_grid(th)
        want = math.sqrt(1 - (1 - delta) ** 2)
        assert np.max(np.abs(np.abs(G) - want)) < 1e-10

    @pytest.mark.parametrize("tau,m", [(2.0, 12), (4.0, 24)])
    def test_unitarity_on_grid(self, tau, m):
        f = fourier_coefficients(tau, m)
        g = complementary_polynomial(f)
        th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        total = np.abs(f.evaluate_grid(th)) ** 2 + np.abs(g.evaluate_grid(th)) ** 2
        assert np.max(np.abs(total - 1.0)) < 1e-10

    def test_real_coefficients(self):
        f = fourier_coefficients(3.0, 16)
        g = complementary_polynomial(f)
        assert all(isinstance(c, mp.mpf) or c.imag == 0 for c in g.coeffs)


def random_valid_pair(m, rng):
    """Forward-build (F, G) from random phases using the inverse recurrences
    of the peel, providing an independent roundtrip oracle."""
    phases = rng.uniform(-np.pi, np.pi, size=m + 1)
    with mpmath.workprec(200):
        F = [mp.cos(mp.mpf(phases[0]) / 2)]
        G = [-mp.sin(mp.mpf(phases[0]) / 2)]
        for j in range(1, m + 1):
            c = mp.cos(mp.mpf(phases[j]) / 2)
            s = mp.sin(mp.mpf(phases[j]) / 2)
            zeros = [mp.mpf(0)]
            if j % 2 == 1:  # D(+): F_j = c w^-1 F' + s w G'; degrees widen by 1
                Fn = [c * v for v in F] + [mp.mpf(0)]
                Gn = [mp.mpf(0)] + [c * v for v in G]
                for i, v in enumerate(G):
                    Fn[i + 1] += s * v
                for i, v in enumerate(F):
                    Gn[i] += -s * v
            else:  # D(-)
                Fn = [mp.mpf(0)] + [c * v for v in F]
                Gn = [c * v for v in G] + [mp.mpf(0)]
                for i, v in enumerate(G):
                    Fn[i] += s * v
                for i, v in enumerate(F):
                    Gn[i + 1] += -s * v
            F, G = Fn, Gn
        return phases, F, G


class TestComputePhases:
    def test_identity(self):
        f = fourier_coefficients(0.0, 2)
        g = complementary_polynomial(f)
        seq = compute_phases(f, g)
        assert seq.verification_residual < 1e-12
        th = np.linspace(0, 2 * np.pi, 128)
        q = build_response_operator(seq.phases_float(), th)
        assert np.max(np.abs(q[:, 0, 0] - 1.0)) < 1e-12

    @pytest.mark.parametrize("tau,m,res", [(2.0, 12, 1e-9), (4.0, 24, 1e-9), (8.0, 32, 1e-9)])
    def test_residuals(self, tau, m, res, phase_cache):
        seq = synthesize_phases(tau, m, cache=phase_cache)
        assert seq.verification_residual <= res

    def test_phase_symmetry(self, phase_cache):
        seq = synthesize_phases(8.0, 32, cache=phase_cache)
        ph = seq.phases_float()
        wrap = lambda x: (x + np.pi) % (2 * np.pi) - np.pi
        dev = max(abs(wrap(ph[k] - (-1) ** k * ph[seq.m - k])) for k in range(seq.m + 1))
        assert dev <= 10 * float(seq.eps_baked) + 1e-10

    def test_roundtrip_of_random_phases(self):
        # peel(forward(phases)) reconstructs the same response operator
        rng = np.random.default_rng(3)
        m = 8
        phases, F, G = random_valid_pair(m, rng)
        from qspcap.response import ComplementaryCoeffs, FourierResponse

        f = FourierResponse(tau=0.0, m=m, eps_baked=mp.mpf(1e-12), coeffs=F)
        g = ComplementaryCoeffs(m=m, coeffs=G)
        seq = compute_phases(f, g)
        th = np.linspace(0, 2 * np.pi, 512, endpoint=False)
        target = f.evaluate_grid(th)
        q = build_response_operator(seq.phases_float(), th)
        assert np.max(np.abs(q[:, 0, 0] - target)) < 1e-10


class TestVerifyPhases:
    def test_zero_phases_identity(self):
        seq = PhaseSequence(phases=[mp.mpf(0)], tau=0.0, m=0, eps_baked=mp.mpf(0))
        from qspcap.response import FourierResponse

        target = FourierResponse(tau=0.0, m=0, eps_baked=mp.mpf(0), coeffs=[mp.mpf(1)])
        assert verify_phases(seq, 64, target=target) < 1e-15

    def test_unitarity_of_reconstruction(self, phase_cache):
        seq = synthesize_phases(4.0, 24, cache=phase_cache)
        th = np.linspace(0, 2 * np.pi, 257)
        q = build_response_operator(seq.phases_float(), th)
        eye = np.einsum("gij,gkj->gik", q, q.conj())
        assert np.max(np.abs(eye - np.eye(2))) < 1e-12

    def test_perturbation_sensitivity(self, phase_cache):
        seq = synthesize_phases(4.0, 24, cache=phase_cache)
        ph = list(seq.phases_float())
        ph[7] += 1e-3
        bumped = PhaseSequence(phases=ph, tau=4.0, m=24, eps_baked=seq.eps_baked)
        r = verify_phases(bumped)
        assert 1e-5 < r < 1e-2  # O(1e-3) response shift


class TestPhaseCache:
    def test_roundtrip_bit_identical(self, tmp_path):
        cache = PhaseCache(str(tmp_path))
        seq = synthesize_phases(2.0, 12)
        cache.put(seq)
        back = cache.get(2.0, 12)
        assert back is not None
        assert [mp.mpf(p) for p in back.phases] == [mp.mpf(p) for p in seq.phases]
        assert back.tau == seq.tau and back.m == seq.m

    def test_miss_on_empty(self, tmp_path):
        cache = PhaseCache(str(tmp_path))
        assert cache.get(3.0, 14) is None
        assert cache.misses == 1

    def test_hit_counter(self, tmp_path):
        cache = PhaseCache(str(tmp_path))
        synthesize_phases(2.0, 12, cache=cache)
        assert cache.hits == 0
        synthesize_phases(2.0, 12, cache=cache)
        assert cache.hits == 1

    def test_corrupt_entry_is_miss(self, tmp_path):
        cache = PhaseCache(str(tmp_path))
        seq = synthesize_phases(2.0, 12)
        path = cache.put(seq)
        head, body = open(path).read().split("phases:\n", 1)
        digit = next(c for c in body if c.isdigit())
        flipped = body.replace(digit, str((int(digit) + 1) % 10), 1)
        open(path, "w").write(head + "phases:\n" + flipped)
        with pytest.raises(CorruptCacheEntry):
            load_phase_file(path)
        assert cache.get(2.0, 12) is None
