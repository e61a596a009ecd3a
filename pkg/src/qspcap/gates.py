"""Gate IR shared by the circuit builders, optimizers, and simulators.

A circuit is a flat, scope-tagged gate list over four registers:
TGT (qubits 0..n-1), CTL (n..n+d-1), PHS (n+d), ANC (n+d+1..n+2d).
Tags carry per-gate provenance (PREP / SELECT / REFL / PHS / OTHER) so that
error channels and capacity studies can be restricted to subcircuits after
inlining; `query` records which of the m signal queries a gate belongs to,
and `pair` links compute/uncompute Toffoli partners that are safe for the
relative-phase pseudo-decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Gate",
    "Circuit",
    "BuildOptions",
    "GATE_ARITY",
    "ROTATION_KINDS",
    "SELF_INVERSE_KINDS",
    "gate_matrix",
    "adjoint_gate",
    "circuit_adjoint",
    "dense_unitary",
    "phase_aligned_distance",
]

SCOPES = ("PREP", "SELECT", "REFL", "PHS", "OTHER")

ROTATION_KINDS = frozenset({"Rx", "Ry", "Rz"})
SELF_INVERSE_KINDS = frozenset({"X", "Y", "Z", "H", "CNOT", "CZ", "SWAP", "Toffoli3", "ToffoliN"})
# Arity None means variable (ToffoliN).
GATE_ARITY = {
    "X": 1, "Y": 1, "Z": 1, "H": 1, "S": 1, "Sdg": 1, "T": 1, "Tdg": 1,
    "Rx": 1, "Ry": 1, "Rz": 1,
    "CNOT": 2, "CZ": 2, "SWAP": 2,
    "Toffoli3": 3, "ToffoliN": None,
    "ProjectZero": 1,
}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple
    angle: float | None = None
    tag: str = "OTHER"
    query: int = 0
    pair: int | None = None

    def __post_init__(self):
        arity = GATE_ARITY.get(self.kind)
        if arity is None and self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind}")
        if arity is not None and len(self.qubits) != arity:
            raise ValueError(f"{self.kind} expects {arity} operands, got {self.qubits}")
        if (self.angle is not None) != (self.kind in ROTATION_KINDS):
            raise ValueError(f"angle present iff rotation kind ({self.kind})")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated operand in {self.kind}{self.qubits}")


def G(kind: str, *qubits, angle=None, tag="OTHER", query=0, pair=None) -> Gate:
    return Gate(kind=kind, qubits=tuple(int(q) for q in qubits), angle=angle,
                tag=tag, query=query, pair=pair)


@dataclass
class BuildOptions:
    """Structural options for QSP circuit assembly.

    echo_prep / echo_select are d-letter Pauli strings (correction operators
    conjugating the coefficient projectors / the signal reflection); when
    symmetrize is set the substitution pattern mirrors across the sequence
    midpoint.
    """

    echo_prep: str | None = None
    echo_select: str | None = None
    symmetrize: bool = False
    decompose_toffoli: bool = False
    peephole: bool = True

    def validate(self, d: int) -> None:
        for name, s in (("echo_prep", self.echo_prep), ("echo_select", self.echo_select)):
            if s is not None:
                if len(s) != d or any(ch not in "IXYZ" for ch in s):
                    raise ValueError(f"{name} must be a {d}-letter Pauli string, got {s!r}")


@dataclass
class Circuit:
    """Flat gate list over the TGT/CTL/PHS/ANC register layout."""

    n: int
    d: int
    gates: list
    meta: dict = field(default_factory=dict)

    # --- register map -----------------------------------------------------
    @property
    def n_qubits(self) -> int:
        return self.n + 2 * self.d + 1

    def tgt(self, i: int) -> int:
        return i

    def ctl(self, j: int) -> int:
        return self.n + j

    def phs(self) -> int:
        return self.n + self.d

    def anc(self, j: int) -> int:
        return self.n + self.d + 1 + j

    def register_of(self, q: int) -> str:
        if q < self.n:
            return "TGT"
        if q < self.n + self.d:
            return "CTL"
        if q == self.n + self.d:
            return "PHS"
        return "ANC"

    def counts(self) -> dict:
        out: dict = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out

    def validate(self) -> None:
        for g in self.gates:
            for q in g.qubits:
                if not (0 <= q < self.n_qubits):
                    raise ValueError(f"operand {q} outside registers in {g}")


# --- matrices --------------------------------------------------------------

_SQ = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "S": np.diag([1, 1j]).astype(complex),
    "Sdg": np.diag([1, -1j]).astype(complex),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]).astype(complex),
    "Tdg": np.diag([1, np.exp(-1j * math.pi / 4)]).astype(complex),
}


def _rot(axis: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if axis == "Rx":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "Ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def _controlled_x(n_controls: int) -> np.ndarray:
    dim = 2 ** (n_controls + 1)
    out = np.eye(dim, dtype=complex)
    # Operand order (c1..ck, t): control bits are the HIGH bits here; we use
    # the convention that qubits tuple maps low->high bit (q[0] = bit 0).
    # Controls q[0..k-1] = bits 0..k-1, target q[k] = bit k.
    mask = (1 << n_controls) - 1
    for idx in range(dim):
        if idx & mask == mask:
            out[idx, idx] = 0
            out[idx, idx ^ (1 << n_controls)] = 1
    return out


def gate_matrix(kind: str, angle: float | None = None, n_qubits: int | None = None) -> np.ndarray:
    """Unitary of a gate on its operand list, operand i = bit i of the index."""
    if kind in _SQ:
        return _SQ[kind]
    if kind in ROTATION_KINDS:
        return _rot(kind, angle)
    if kind == "CNOT":
        # operands (control, target): control = bit 0, target = bit 1
        m = np.eye(4, dtype=complex)
        m[[1, 3]] = m[[3, 1]]
        return m
    if kind == "CZ":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if kind == "SWAP":
        m = np.eye(4, dtype=complex)
        m[[1, 2]] = m[[2, 1]]
        return m
    if kind == "Toffoli3":
        return _controlled_x(2)
    if kind == "ToffoliN":
        return _controlled_x(n_qubits - 1)
    if kind == "ProjectZero":
        return np.diag([1, 0]).astype(complex)
    raise ValueError(f"no matrix for kind {kind}")


_ADJOINT_KIND = {"S": "Sdg", "Sdg": "S", "T": "Tdg", "Tdg": "T"}


def adjoint_gate(g: Gate) -> Gate:
    if g.kind in ROTATION_KINDS:
        return replace(g, angle=-g.angle)
    if g.kind in _ADJOINT_KIND:
        return replace(g, kind=_ADJOINT_KIND[g.kind])
    if g.kind == "ProjectZero":
        return g
    return g  # self-inverse


def circuit_adjoint(gates: list) -> list:
    return [adjoint_gate(g) for g in reversed(gates)]


def dense_unitary(circuit: Circuit, n_qubits: int | None = None) -> np.ndarray:
    """Full matrix of a circuit (projectors included, so possibly singular).

    Intended for oracle checks at small qubit counts.
    """
    N = n_qubits if n_qubits is not None else circuit.n_qubits
    dim = 2**N
    if dim > 1 << 13:
        raise ValueError("dense_unitary capped at 13 qubits")
    from .simulators.dense import apply_gate_to_array

    mat = np.eye(dim, dtype=complex)
    for g in circuit.gates:
        mat = apply_gate_to_array(mat, g, N)
    return mat


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max-abs difference after removing one global phase (largest overlap)."""
    num = np.vdot(a.reshape(-1), b.reshape(-1))
    phase = num / abs(num) if abs(num) > 1e-300 else 1.0
    return float(np.max(np.abs(b - phase * a)))
