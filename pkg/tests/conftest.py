import numpy as np
import pytest

from qspcap.response import PhaseCache
from qspcap.simulators.dense import apply_gate_to_array


@pytest.fixture(scope="session")
def phase_cache(tmp_path_factory):
    return PhaseCache(str(tmp_path_factory.mktemp("phases")))


def run_gates_dense(gates, n_qubits, psi=None):
    if psi is None:
        psi = np.zeros(2**n_qubits, dtype=complex)
        psi[0] = 1.0
    else:
        psi = np.asarray(psi, dtype=complex).copy()
    for g in gates:
        psi = apply_gate_to_array(psi, g, n_qubits)
    return psi


def circuit_output(circ, psi0_tgt):
    """Dense end-to-end run of an assembled circuit (projectors included)."""
    N = circ.n_qubits
    psi = np.zeros(2**N, dtype=complex)
    psi[: len(psi0_tgt)] = psi0_tgt
    return run_gates_dense(circ.gates, N, psi)


def align_phase(a, b):
    ov = np.vdot(a.reshape(-1), b.reshape(-1))
    ph = ov / abs(ov) if abs(ov) > 1e-300 else 1.0
    return float(np.max(np.abs(b - ph * a)))
