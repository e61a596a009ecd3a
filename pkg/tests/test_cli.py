"""CLI commands, exit codes, and run-directory hygiene."""

import json
import os

import numpy as np
import pytest

from qspcap.cli import main
from qspcap.specfun import required_depth


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("QSPCAP_PHASE_CACHE", str(tmp_path / "cache"))
    return tmp_path


class TestPhases:
    def test_trivial(self, workdir, capsys):
        assert main(["phases", "--tau", "0", "--m", "2"]) == 0
        out = capsys.readouterr().out
        assert "residual" in out

    def test_eps_chooses_required_depth(self, workdir, capsys):
        assert main(["phases", "--tau", "4", "--eps", "1e-3"]) == 0
        out = capsys.readouterr().out
        want = required_depth(4.0, 1e-3)
        assert f"m={want}" in out

    def test_cache_hit_reported(self, workdir, capsys):
        main(["phases", "--tau", "2", "--m", "12", "--cache-dir", str(workdir / "cache")])
        main(["phases", "--tau", "2", "--m", "12", "--cache-dir", str(workdir / "cache")])
        out = capsys.readouterr().out
        assert "cache_hit=True" in out

    def test_config_error(self, workdir):
        assert main(["phases", "--tau", "4"]) == 2
        assert main(["phases", "--tau", "4", "--m", "12", "--eps", "1e-3"]) == 2


class TestBuildSimulate:
    def test_build_and_roundtrip(self, workdir, capsys):
        rc = main(["build", "--spin-chain", "3", "--seed", "7", "--tau", "2", "--m", "8",
                   "--out", "c.qasm"])
        assert rc == 0
        assert os.path.exists("c.qasm")
        from qspcap.qasm import import_qasm_file

        circ = import_qasm_file("c.qasm")
        assert circ.n == 3 and circ.meta["m"] == 8

    def test_peephole_flag_monotone(self, workdir, capsys):
        main(["build", "--spin-chain", "3", "--seed", "7", "--tau", "2", "--m", "8",
              "--out", "a.qasm"])
        main(["build", "--spin-chain", "3", "--seed", "7", "--tau", "2", "--m", "8",
              "--no-peephole", "--out", "b.qasm"])
        from qspcap.qasm import import_qasm_file

        assert len(import_qasm_file("a.qasm").gates) < len(import_qasm_file("b.qasm").gates)

    def test_simulate_error_free_bound(self, workdir, capsys):
        main(["build", "--spin-chain", "3", "--seed", "7", "--tau", "2", "--m", "12",
              "--out", "c.qasm"])
        rc = main(["simulate", "--qasm", "c.qasm", "--spin-chain", "3", "--seed", "7",
                   "--trials", "1"])
        assert rc == 0
        out = capsys.readouterr().out
        pf = float(out.split("p_f=")[1].split()[0])
        from qspcap.specfun import eps_num

        assert pf <= 4 * float(eps_num(2.0, 12))
        assert os.path.exists("simulation.csv")

    def test_deterministic_channel_single_row(self, workdir):
        main(["build", "--spin-chain", "3", "--seed", "7", "--tau", "2", "--m", "8",
              "--out", "c.qasm"])
        with open("err.json", "w") as fh:
            json.dump({"kind": "coherent-amplitude", "strength": 1e-6}, fh)
        assert main(["simulate", "--qasm", "c.qasm", "--errors", "err.json",
                     "--trials", "1"]) == 0
        rows = open("simulation.csv").read().strip().splitlines()
        assert len(rows) == 2  # header + single row

    def test_backends_agree(self, workdir, capsys):
        main(["build", "--spin-chain", "3", "--seed", "7", "--tau", "2", "--m", "8",
              "--out", "c.qasm"])
        vals = []
        for backend in ("dense", "tree"):
            main(["simulate", "--qasm", "c.qasm", "--trials", "1", "--backend", backend,
                  "--seed", "5"])
            out = capsys.readouterr().out
            vals.append(float(out.split("p_f=")[1].split()[0]))
        assert abs(vals[0] - vals[1]) < 1e-10


class TestSweepFitReport:
    def test_empty_sweep(self, workdir, capsys):
        with open("cfg.json", "w") as fh:
            json.dump([], fh)
        assert main(["sweep", "--config", "cfg.json", "--out", "runs/empty"]) == 0
        assert os.path.exists("runs/empty/results.csv")
        assert os.path.exists("runs/empty/manifest.json")

    def test_no_clobber(self, workdir):
        with open("cfg.json", "w") as fh:
            json.dump([], fh)
        main(["sweep", "--config", "cfg.json", "--out", "runs/x"])
        main(["sweep", "--config", "cfg.json", "--out", "runs/x"])
        assert os.path.exists("runs/x") and os.path.exists("runs/x.1")

    def test_fit_pipeline(self, workdir, capsys):
        points = [
            {"n": 3, "tau": 2.0, "m": m, "trials": 4, "hamiltonian_count": 2,
             "max_fault_count": 2,
             "channel": {"kind": "depolarization", "strength": 3e-5}}
            for m in (16, 20, 24, 28)
        ]
        with open("cfg.json", "w") as fh:
            json.dump({"points": points}, fh)
        assert main(["fit", "--config", "cfg.json", "--out", "runs/fit", "--seed", "3"]) == 0
        model = json.load(open("runs/fit/model.json"))
        assert model[0]["kind"] == "stochastic-linear"
        assert model[0]["params"]["chi"] > 0
        assert os.path.exists("runs/fit/sweep.svg")

    def test_report_extrapolation(self, workdir, capsys):
        model = [{"kind": "stochastic-linear",
                  "params": {"chi": 594.0, "zeta": 51.0, "p_eps": 1e-6, "n": 11}}]
        with open("model.json", "w") as fh:
            json.dump(model, fh)
        rc = main(["report", "--model", "model.json", "--extrapolate-to", "50",
                   "--counts", '{"11": 440, "50": 1819}', "--out", "runs/rep"])
        assert rc == 0
        rep = json.load(open("runs/rep/report.json"))
        assert rep[0]["extrapolation"]["chi"] == pytest.approx(594.0 * 1819 / 440)
