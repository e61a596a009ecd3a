"""Experiment orchestration, model fits, optimal depth, extrapolation."""

import csv
import json
import math
import os

import numpy as np
import pytest

from qspcap.capacity import (
    CapacityModel,
    ExperimentConfig,
    ERROR_FREE_PF_COEFF,
    emit_report,
    extrapolate,
    find_optimal_depth,
    fit_coherent,
    fit_stochastic,
    run_experiment,
)
from qspcap.errors import ErrorChannel
from qspcap.specfun import eps_num


class TestRunExperiment:
    def test_error_free_band(self, phase_cache):
        cfg = ExperimentConfig(n=3, tau=2.0, m=12, channel=None,
                               hamiltonian_count=4, states_per_hamiltonian=2, seed=9)
        res = run_experiment(cfg, phase_cache)
        assert res.eps_num <= res.p_f_mean <= 4 * res.eps_num
        assert res.infid_mean <= (2 * res.eps_num) ** 2

    def test_reproducible(self, phase_cache):
        cfg = ExperimentConfig(n=3, tau=2.0, m=8, channel=None, trials=1,
                               hamiltonian_count=2, seed=3)
        a = run_experiment(cfg, phase_cache)
        b = run_experiment(cfg, phase_cache)
        assert a.p_f_mean == b.p_f_mean and a.infid_mean == b.infid_mean
        assert a.csv_rows() == b.csv_rows()

    def test_importance_matches_direct(self, phase_cache):
        ch = ErrorChannel("depolarization", 2e-5)
        imp = run_experiment(ExperimentConfig(n=3, tau=2.0, m=20, channel=ch, trials=6,
                                              hamiltonian_count=2, seed=4,
                                              max_fault_count=2), phase_cache)
        direct = run_experiment(ExperimentConfig(n=3, tau=2.0, m=20, channel=ch, trials=150,
                                                 hamiltonian_count=2, seed=4,
                                                 importance=False), phase_cache)
        sigma = math.hypot(imp.p_f_stderr, direct.p_f_stderr) + 1e-4
        assert abs(imp.p_f_mean - direct.p_f_mean) < 3 * sigma


class TestFindOptimalDepth:
    def test_error_free_unbounded(self):
        out = find_optimal_depth(3, 2.0, None, search_budget=5)
        assert out.flagged == "unbounded"

    def test_synthetic_model_matches_exhaustive(self):
        # minimize a eps_num(tau, m) + b m p over even m, vs exhaustive scan
        tau, p = 4.0, 1e-5
        a, b = ERROR_FREE_PF_COEFF, 210.0

        def model(m):
            return a * float(eps_num(tau, m)) + b * m * p

        ms = list(range(8, 61, 2))
        exhaustive = min(ms, key=model)
        from qspcap.capacity import OptimalDepth

        best = None
        m = 8
        for _ in range(30):
            v = model(m)
            if best is None or v < best[1]:
                best = (m, v)
            m += 2
        assert abs(best[0] - exhaustive) <= 2

    def test_stochastic_path_runs(self, phase_cache):
        ch = ErrorChannel("depolarization", 3e-4)
        out = find_optimal_depth(3, 2.0, ch, search_budget=10, seed=2,
                                 config_kwargs=dict(hamiltonian_count=2, trials=4,
                                                    max_fault_count=2))
        assert out.m_star % 2 == 0 and out.m_star >= 4
        assert 0 <= out.p_f_star <= 1


class TestFitStochastic:
    def synthetic_results(self, chi, zeta, p, n=5, tau=8.0):
        out = []
        for m in (32, 48, 64, 80):
            cfg = ExperimentConfig(n=n, tau=tau, m=m, channel=ErrorChannel("depolarization", p))
            e = float(eps_num(tau, m))
            res_pf = ERROR_FREE_PF_COEFF * e + chi * m * p
            res_if = 0.833 * e * e + zeta * m * p
            from qspcap.capacity import ExperimentResult

            out.append(ExperimentResult(config=cfg, p_f_mean=res_pf, p_f_stderr=0.0,
                                        infid_mean=res_if, infid_stderr=0.0, eps_num=e,
                                        gate_total=200 * m, per_query_gates=200.0, slots=400 * m))
        return out

    def test_recovers_planted(self):
        model = fit_stochastic(self.synthetic_results(310.0, 55.0, 1e-6))
        assert model.params["chi"] == pytest.approx(310.0, abs=1e-8)
        assert model.params["zeta"] == pytest.approx(55.0, abs=1e-8)
        assert model.residuals["chi_r2"] > 0.999999

    def test_insufficient_dominance(self):
        from qspcap.capacity import InsufficientDominance

        results = self.synthetic_results(310.0, 55.0, 1e-6, tau=8.0)
        # shrink m so the baseline dominates
        bad = self.synthetic_results(1e-6, 1e-6, 1e-12)
        with pytest.raises(InsufficientDominance):
            fit_stochastic(bad)


class TestFitCoherent:
    def test_recovers_planted_power_law(self):
        rng = np.random.default_rng(0)
        taus = np.array([4.0, 8.0, 16.0, 32.0, 64.0, 128.0])
        alpha, beta, gamma = 3e-4, 2e-5, 0.82
        pts = [(t, alpha + beta * t**gamma) for t in taus]
        model = fit_coherent(pts)
        assert model.params["alpha"] == pytest.approx(alpha, rel=1e-5)
        assert model.params["beta"] == pytest.approx(beta, rel=1e-4)
        assert model.params["gamma"] == pytest.approx(gamma, rel=1e-4)

    def test_prep_constant(self):
        pts = [(t, 1e-4 + 2e-6 * t) for t in (4.0, 16.0, 64.0)]
        prep = [(4.0, 5e-4), (16.0, 5.1e-4), (64.0, 4.9e-4)]
        model = fit_coherent(pts, prep_points=prep)
        assert model.params["prep_constant"] == pytest.approx(5e-4, rel=0.05)
        assert abs(model.params["prep_tau_slope"]) < 1e-6

    def test_degenerate_range_rejected(self):
        with pytest.raises(ValueError):
            fit_coherent([(4.0, 1e-3), (4.4, 1.1e-3), (4.8, 1.2e-3)])


class TestExtrapolate:
    def model(self, chi=594.0, zeta=51.0):
        return CapacityModel(kind="stochastic-linear",
                             params={"chi": chi, "zeta": zeta, "p_eps": 1e-6, "n": 11})

    def test_table_ratio(self):
        out = extrapolate(self.model(), 11, 50, counts={11: 440.0, 50: 1819.0})
        assert out["chi"] / 594.0 == pytest.approx(1819.0 / 440.0, abs=1e-12)
        assert out["meaningful_tau"] == 2500.0

    def test_identity(self):
        out = extrapolate(self.model(), 11, 11, counts={11: 440.0})
        assert out["chi"] == pytest.approx(594.0)

    def test_linearity_in_counts(self):
        a = extrapolate(self.model(), 11, 50, counts={11: 440.0, 50: 880.0})
        assert a["chi"] == pytest.approx(2 * 594.0)

    def test_meaningful_tau_spotcheck(self):
        out = extrapolate(self.model(), 11, 4, counts={11: 440.0, 4: 150.0})
        assert out["meaningful_tau"] == 16.0


class TestEmitReport:
    def test_empty(self, tmp_path):
        paths = emit_report([], [], str(tmp_path / "r"))
        header = open(paths["results"]).read().strip().splitlines()
        assert len(header) == 1  # headers only
        assert "plot" not in paths

    def test_roundtrip(self, phase_cache, tmp_path):
        cfg = ExperimentConfig(n=3, tau=2.0, m=8, channel=None, hamiltonian_count=2, seed=1)
        res = run_experiment(cfg, phase_cache)
        paths = emit_report([res], [], str(tmp_path / "r"))
        with open(paths["results"]) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert float(rows[0]["p_f"]) == res.p_f_mean  # repr round-trip exact
        assert os.path.exists(paths["plot"])
        svg = open(paths["plot"]).read()
        assert svg.lstrip().startswith("<?xml")
