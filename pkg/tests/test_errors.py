"""Error channels: Kraus completeness, plan statistics, coherent powers,
and importance combining."""

import math

import numpy as np
import pytest
import sympy
from scipy.stats import binom, chisquare

from qspcap.circuit import assemble_qsp
from qspcap.errors import (
    COHERENT_KIND,
    STOCHASTIC_KINDS,
    ErrorChannel,
    InsufficientCoverage,
    ScopeFilter,
    channel_from_json,
    channel_to_json,
    coherent_plan,
    combine_importance,
    count_slots,
    fractional_power,
    kraus_operators,
    sample_plan,
    selection_weights,
)
from qspcap.gates import BuildOptions, Circuit, G, gate_matrix
from qspcap.hamiltonian import pauli_decompose, random_spin_chain
from qspcap.response import synthesize_phases


class TestKraus:
    @pytest.mark.parametrize("kind", STOCHASTIC_KINDS)
    def test_completeness_symbolic(self, kind):
        # exact symbolic check of sum E^dag E = I
        p = sympy.Symbol("p", positive=True)
        sp_ = sympy.sqrt(p)
        sq = sympy.sqrt(1 - p)
        I2 = sympy.eye(2)
        X = sympy.Matrix([[0, 1], [1, 0]])
        Y = sympy.Matrix([[0, -sympy.I], [sympy.I, 0]])
        Z = sympy.Matrix([[1, 0], [0, -1]])
        P0 = sympy.Matrix([[1, 0], [0, 0]])
        P1 = sympy.Matrix([[0, 0], [0, 1]])
        LO = sympy.Matrix([[0, 1], [0, 0]])
        table = {
            "amplitude-damping": [P0 + sq * P1, sp_ * LO],
            "phase-damping": [sq * I2, sp_ * P0, sp_ * P1],
            "bit-flip": [sq * I2, sp_ * X],
            "phase-flip": [sq * I2, sp_ * Z],
            "depolarization": [sq * I2, sp_ / sympy.sqrt(3) * X,
                               sp_ / sympy.sqrt(3) * Y, sp_ / sympy.sqrt(3) * Z],
        }
        total = sympy.zeros(2, 2)
        for E in table[kind]:
            total += E.H * E
        resid = sympy.simplify(total - I2)
        # sqrt(1-p) is real on the channel's domain 0 <= p <= 1
        resid = resid.subs(sympy.conjugate(sq), sq)
        assert sympy.simplify(resid) == sympy.zeros(2, 2)
        # and numerically for the implementation's operators
        num = sum(E.conj().T @ E for E in kraus_operators(kind, 0.137))
        assert np.max(np.abs(num - np.eye(2))) < 1e-12

    @pytest.mark.parametrize("kind", STOCHASTIC_KINDS)
    def test_weights_normalized(self, kind):
        w = selection_weights(kind, 0.2)
        assert sum(w) == pytest.approx(1.0)
        assert w[0] == pytest.approx(0.8)


class TestSlots:
    def test_single_cnot(self):
        circ = Circuit(n=2, d=0, gates=[G("CNOT", 0, 1)])
        assert count_slots(circ, ErrorChannel("bit-flip", 0.1)) == 2

    def test_empty(self):
        assert count_slots(Circuit(n=2, d=0, gates=[]), ErrorChannel("bit-flip", 0.1)) == 0

    def test_scope_restriction(self, phase_cache):
        lcu = pauli_decompose(random_spin_chain(3, 3))
        seq = synthesize_phases(2.0, 8, cache=phase_cache)
        circ = assemble_qsp(lcu, seq, BuildOptions(peephole=False))
        ch = ErrorChannel("depolarization", 0.01, scope=ScopeFilter(tags=("PREP",)))
        want = sum(len(g.qubits) for g in circ.gates if g.tag == "PREP")
        assert count_slots(circ, ch) == want

    def test_projectors_excluded(self):
        circ = Circuit(n=1, d=0, gates=[G("ProjectZero", 0)])
        assert count_slots(circ, ErrorChannel("bit-flip", 0.1)) == 0


class TestSamplePlan:
    def circ(self):
        return Circuit(n=5, d=0, gates=[G("CNOT", i % 5, (i + 1) % 5) for i in range(25)])

    def test_zero_strength_empty(self):
        plan = sample_plan(self.circ(), ErrorChannel("bit-flip", 0.0), seed=1)
        assert plan.placements == [] and plan.n_errors == 0

    def test_conditioned_zero(self):
        plan = sample_plan(self.circ(), ErrorChannel("bit-flip", 0.3), seed=1, conditioned_n=0)
        assert plan.placements == []

    def test_conditioned_count(self):
        plan = sample_plan(self.circ(), ErrorChannel("depolarization", 0.1), seed=2, conditioned_n=7)
        assert plan.n_errors == 7 and len(plan.placements) == 7
        assert all(op >= 1 for _, _, op in plan.placements)

    def test_conditioned_exceeds_slots(self):
        with pytest.raises(ValueError):
            sample_plan(self.circ(), ErrorChannel("bit-flip", 0.1), seed=0, conditioned_n=51)

    def test_binomial_frequency(self):
        # frequency of n_errors over draws matches Binomial(R, p)
        circ = self.circ()
        ch = ErrorChannel("depolarization", 0.02)
        R = count_slots(circ, ch)
        assert R == 50
        counts = {}
        trials = 20_000
        for t in range(trials):
            plan = sample_plan(circ, ch, seed=5, trial_id=t)
            counts[plan.n_errors] = counts.get(plan.n_errors, 0) + 1
        ks = sorted(counts)
        kmax = max(ks)
        observed = np.array([counts.get(k, 0) for k in range(kmax + 1)], dtype=float)
        expected = np.array([binom.pmf(k, R, 0.02) * trials for k in range(kmax + 1)])
        # fold the tail into the last bin for a valid chi-square
        expected[-1] += trials - expected.sum()
        stat, pval = chisquare(observed, expected)
        assert pval > 0.01

    def test_conditioned_uniform_inclusion(self):
        # pairwise slot-inclusion frequencies equal within 3 sigma
        circ = Circuit(n=3, d=0, gates=[G("CNOT", 0, 1), G("CNOT", 1, 2), G("H", 0)])
        ch = ErrorChannel("bit-flip", 0.1)
        R = count_slots(circ, ch)
        trials = 20_000
        hits = np.zeros(R)
        for t in range(trials):
            plan = sample_plan(circ, ch, seed=8, conditioned_n=2, trial_id=t)
            slots = list(_slot_index(circ, ch))
            for gi, q, _ in plan.placements:
                hits[slots.index((gi, q))] += 1
        pexp = 2.0 / R
        sigma = math.sqrt(pexp * (1 - pexp) / trials)
        assert np.all(np.abs(hits / trials - pexp) < 3.5 * sigma)


def _slot_index(circ, ch):
    from qspcap.errors import iter_slots

    return iter_slots(circ, ch)


class TestCoherent:
    def test_rotation_angle_scaling(self):
        g = G("Rz", 0, angle=0.8)
        E = fractional_power(g, 0.01)
        want = gate_matrix("Rz", 0.008)
        assert np.max(np.abs(E - want)) < 1e-14

    def test_eps_zero_identity(self):
        for kind, qubits in [("X", (0,)), ("CNOT", (0, 1)), ("Toffoli3", (0, 1, 2))]:
            g = G(kind, *qubits)
            E = fractional_power(g, 0.0)
            assert np.max(np.abs(E - np.eye(2 ** len(qubits)))) < 1e-14

    def test_x_eigenvalues(self):
        eps = 0.013
        E = fractional_power(G("X", 0), eps)
        ev = np.sort_complex(np.linalg.eigvals(E))
        want = np.sort_complex(np.array([1.0, np.exp(1j * math.pi * eps)]))
        assert np.max(np.abs(ev - want)) < 1e-12

    def test_commutes_with_gate(self):
        for kind, qubits in [("X", (0,)), ("H", (0,)), ("CNOT", (0, 1)),
                             ("SWAP", (0, 1)), ("Toffoli3", (0, 1, 2))]:
            g = G(kind, *qubits)
            gm = gate_matrix(kind, None, len(qubits))
            E = fractional_power(g, 0.02)
            assert np.max(np.abs(E @ gm - gm @ E)) < 1e-12

    def test_plan_is_deterministic_and_scoped(self, phase_cache):
        lcu = pauli_decompose(random_spin_chain(3, 3))
        seq = synthesize_phases(2.0, 8, cache=phase_cache)
        circ = assemble_qsp(lcu, seq, BuildOptions(peephole=False))
        ch = ErrorChannel(COHERENT_KIND, 1e-4, scope=ScopeFilter(tags=("PREP",), kinds=("CNOT",)))
        plan = coherent_plan(circ, ch)
        want = sum(1 for g in circ.gates if g.tag == "PREP" and g.kind == "CNOT")
        assert plan.n_errors == want
        assert all(op == "frac" for _, _, op in plan.placements)


class TestCombineImportance:
    def test_only_zero_count(self):
        val, tail = combine_importance({0: 0.37}, R=100, p=0.0)
        assert val == pytest.approx(0.37) and tail == pytest.approx(0.0)

    def test_constant_means(self):
        vals = {n: 0.5 for n in range(12)}
        val, tail = combine_importance(vals, R=60, p=0.01)
        assert val == pytest.approx(0.5, rel=1e-6)

    def test_linear_law_closed_form(self):
        R, p = 100, 1e-3
        a, b = 0.01, 0.002
        vals = {n: a + b * n for n in range(8)}
        val, tail = combine_importance(vals, R, p)
        assert val == pytest.approx(a + b * R * p, rel=1e-3)

    def test_insufficient_coverage(self):
        with pytest.raises(InsufficientCoverage):
            combine_importance({0: 0.1, 1: 0.2}, R=1000, p=0.05)


class TestJsonConfig:
    def test_roundtrip(self):
        ch = ErrorChannel("depolarization", 1e-4,
                          scope=ScopeFilter(tags=("SELECT",), kinds=("CNOT", "Toffoli3")))
        back = channel_from_json(channel_to_json(ch))
        assert back == ch

    def test_from_string(self):
        ch = channel_from_json('{"kind": "bit-flip", "strength": 0.01}')
        assert ch.kind == "bit-flip" and ch.strength == 0.01
