"""QASM dialect export/import."""

import numpy as np
import pytest

from qspcap.circuit import assemble_qsp
from qspcap.gates import BuildOptions, Circuit, G
from qspcap.hamiltonian import pauli_decompose, random_spin_chain
from qspcap.qasm import export_qasm, import_qasm, qasm_string
from qspcap.response import synthesize_phases


def gates_equal(a, b):
    return (len(a.gates) == len(b.gates)) and all(
        x.kind == y.kind and x.qubits == y.qubits and x.angle == y.angle
        and x.tag == y.tag and x.query == y.query and x.pair == y.pair
        for x, y in zip(a.gates, b.gates)
    )


class TestRoundTrip:
    def test_full_circuit(self, phase_cache):
        lcu = pauli_decompose(random_spin_chain(3, 11))
        seq = synthesize_phases(2.0, 8, cache=phase_cache)
        circ = assemble_qsp(lcu, seq)
        back = import_qasm(qasm_string(circ))
        assert gates_equal(circ, back)
        assert back.meta["m"] == 8 and back.meta["tau"] == 2.0

    def test_file_roundtrip(self, phase_cache, tmp_path):
        from qspcap.qasm import import_qasm_file

        lcu = pauli_decompose(random_spin_chain(3, 2))
        seq = synthesize_phases(0.0, 2, cache=phase_cache)
        circ = assemble_qsp(lcu, seq, BuildOptions(peephole=False))
        path = str(tmp_path / "c.qasm")
        export_qasm(circ, path)
        assert gates_equal(circ, import_qasm_file(path))

    def test_one_gate_line_count(self):
        circ = Circuit(n=1, d=0, gates=[G("H", 0)])
        lines = [l for l in qasm_string(circ).splitlines()
                 if l and not l.startswith(("//", "OPENQASM", "qreg"))]
        assert lines == ["h tgt[0];"]

    def test_scope_pragmas_match_transitions(self, phase_cache):
        lcu = pauli_decompose(random_spin_chain(3, 4))
        seq = synthesize_phases(2.0, 8, cache=phase_cache)
        circ = assemble_qsp(lcu, seq, BuildOptions(peephole=False))
        transitions = 1
        for a, b in zip(circ.gates, circ.gates[1:]):
            if a.tag != b.tag:
                transitions += 1
        pragmas = sum(1 for l in qasm_string(circ).splitlines() if l.startswith("// #scope "))
        assert pragmas == transitions

    def test_angle_precision_exact(self):
        circ = Circuit(n=1, d=0, gates=[G("Rz", 0, angle=0.1 + 1e-17)])
        back = import_qasm(qasm_string(circ))
        assert back.gates[0].angle == circ.gates[0].angle

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            import_qasm("// #registers n=1 d=0\nfrobnicate tgt[0];\n")
