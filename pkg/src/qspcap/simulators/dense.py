"""Reference state-array simulator: one complex amplitude per basis state.

Qubit q is bit q of the basis index.  This backend defines the semantics the
vector-tree and stabilizer-hybrid backends are tested against.
"""

from __future__ import annotations

import math

import numpy as np

from ..gates import GATE_ARITY, ROTATION_KINDS, Gate, gate_matrix

__all__ = ["DenseState", "apply_gate_to_array", "apply_matrix_to_array"]

_DIAG_KINDS = {"Z", "S", "Sdg", "T", "Tdg", "Rz", "CZ", "ProjectZero"}


def apply_matrix_to_array(psi: np.ndarray, mat: np.ndarray, qubits: tuple, n_qubits: int) -> np.ndarray:
    """Apply a k-qubit matrix to axis-0 of psi (shape (2^N, ...)).

    Operand i of `qubits` is bit i of the matrix's index.
    """
    k = len(qubits)
    extra = psi.shape[1:]
    t = psi.reshape((2,) * n_qubits + extra)
    # Axis for qubit q is (n_qubits - 1 - q) in this reshape.
    axes = [n_qubits - 1 - q for q in qubits]
    t = np.moveaxis(t, axes, range(k))
    # Matrix index bit i corresponds to operand i; after moveaxis operand i
    # sits at axis i with its bit being the SLOWEST within the block, so
    # reorder to make operand 0 the least significant: reverse the axes.
    t = np.moveaxis(t, range(k), range(k - 1, -1, -1))
    rest = t.shape[k:]
    t = t.reshape(2**k, -1)
    t = mat @ t
    t = t.reshape((2,) * k + rest)
    t = np.moveaxis(t, range(k - 1, -1, -1), range(k))
    t = np.moveaxis(t, range(k), axes)
    return np.ascontiguousarray(t.reshape((2**n_qubits,) + extra))


def apply_gate_to_array(psi: np.ndarray, g: Gate, n_qubits: int) -> np.ndarray:
    """Gate dispatch with fast paths for diagonal and permutation gates."""
    kind = g.kind
    if kind == "ProjectZero":
        q = g.qubits[0]
        t = psi.reshape((2,) * n_qubits + psi.shape[1:])
        sl = [slice(None)] * n_qubits
        sl[n_qubits - 1 - q] = 1
        t[tuple(sl)] = 0
        return psi
    if kind in ("CNOT", "Toffoli3", "ToffoliN", "X", "SWAP"):
        return _apply_perm(psi, g, n_qubits)
    if kind in _DIAG_KINDS:
        return _apply_diag(psi, g, n_qubits)
    mat = gate_matrix(kind, g.angle, len(g.qubits))
    return apply_matrix_to_array(psi, mat, g.qubits, n_qubits)


def _apply_diag(psi: np.ndarray, g: Gate, n_qubits: int) -> np.ndarray:
    t = psi.reshape((2,) * n_qubits + psi.shape[1:])
    if g.kind == "CZ":
        a, b = g.qubits
        sl = [slice(None)] * n_qubits
        sl[n_qubits - 1 - a] = 1
        sl[n_qubits - 1 - b] = 1
        t[tuple(sl)] *= -1
        return psi
    q = g.qubits[0]
    phase = {
        "Z": -1.0 + 0j,
        "S": 1j,
        "Sdg": -1j,
        "T": np.exp(1j * math.pi / 4),
        "Tdg": np.exp(-1j * math.pi / 4),
    }.get(g.kind)
    sl = [slice(None)] * n_qubits
    sl[n_qubits - 1 - q] = 1
    if g.kind == "Rz":
        t[tuple(sl)] *= np.exp(0.5j * g.angle)
        sl[n_qubits - 1 - q] = 0
        t[tuple(sl)] *= np.exp(-0.5j * g.angle)
    else:
        t[tuple(sl)] *= phase
    return psi


def _apply_perm(psi: np.ndarray, g: Gate, n_qubits: int) -> np.ndarray:
    t = psi.reshape((2,) * n_qubits + psi.shape[1:])
    ax = lambda q: n_qubits - 1 - q
    if g.kind == "X":
        return psi.reshape(psi.shape) if _flip_axis(t, ax(g.qubits[0])) else psi
    if g.kind == "SWAP":
        a, b = g.qubits
        tt = np.swapaxes(t, ax(a), ax(b))
        t[...] = tt.copy()
        return psi
    # Controlled-X family: flip target where all controls are 1.
    *controls, target = g.qubits
    sl = [slice(None)] * n_qubits
    for c in controls:
        sl[ax(c)] = 1
    sub = t[tuple(sl)]
    # target axis position within the sliced view
    tpos = ax(target) - sum(1 for c in controls if ax(c) < ax(target))
    t[tuple(sl)] = np.flip(sub, axis=tpos).copy()
    return psi


def _flip_axis(t: np.ndarray, axis: int) -> bool:
    t[...] = np.flip(t, axis=axis).copy()
    return True


class DenseState:
    """Mutable dense state over n_qubits; gates apply in place."""

    def __init__(self, n_qubits: int, vector: np.ndarray | None = None):
        if n_qubits > 26:
            raise MemoryError(f"dense backend capped at 26 qubits, got {n_qubits}")
        self.n_qubits = n_qubits
        if vector is None:
            self.psi = np.zeros(2**n_qubits, dtype=complex)
            self.psi[0] = 1.0
        else:
            self.psi = np.asarray(vector, dtype=complex).copy()

    @classmethod
    def from_product(cls, n_qubits: int, tgt_state: np.ndarray) -> "DenseState":
        st = cls(n_qubits)
        st.psi[:] = 0
        st.psi[: len(tgt_state)] = tgt_state  # TGT = low bits, rest |0>
        return st

    def apply_gate(self, g: Gate) -> None:
        self.psi = apply_gate_to_array(self.psi, g, self.n_qubits)

    def apply_matrix(self, mat: np.ndarray, qubits: tuple) -> None:
        self.psi = apply_matrix_to_array(self.psi, mat, qubits, self.n_qubits)

    def project_zero(self, qubit: int) -> float:
        before = float(np.vdot(self.psi, self.psi).real)
        if before == 0.0:
            return 0.0
        self.apply_gate(Gate(kind="ProjectZero", qubits=(qubit,)))
        after = float(np.vdot(self.psi, self.psi).real)
        return after / before

    def norm_sq(self) -> float:
        return float(np.vdot(self.psi, self.psi).real)

    def to_dense(self) -> np.ndarray:
        return self.psi.copy()

    def gate_to_full_action(self, g: Gate, mat: np.ndarray) -> np.ndarray:
        """Apply gate to every column of a (2^N, K) matrix (oracle helper)."""
        return apply_gate_to_array(mat, g, self.n_qubits)
