"""Stabilizer/destabilizer hybrid backend.

The state is written as |psi> = sum_x c_x D^x |psi_s>, where |psi_s> is the
stabilizer state of a signed Aaronson-Gottesman tableau, D^x is an
index-ordered product of destabilizer generators, and the coordinates c_x
live in a vector tree whose leaf subset mirrors the TGT register.

Clifford gates conjugate the (signed) generators in place and never touch
the tree: D^x built from the updated signed rows absorbs every phase, so the
coordinates are invariant.  A non-Clifford gate G is expanded over Pauli
strings; each string P resolves against the tableau as P = alpha D^y S^z,
turning G into a short sum of coordinate-space flip/phase masks executed in
the tree.
"""

from __future__ import annotations

import math

import numpy as np

from ..gates import Gate, gate_matrix
from .tree import VectorTreeState

__all__ = ["HybridState"]

CLIFFORD_KINDS = frozenset({"X", "Y", "Z", "H", "S", "Sdg", "CNOT", "CZ", "SWAP"})


def pauli_mul(a, b):
    """(t, x, z) with P = i^t * prod_q X^x Z^z; t advances by 2 per ZX swap."""
    t1, x1, z1 = a
    t2, x2, z2 = b
    t = (t1 + t2 + 2 * bin(z1 & x2).count("1")) % 4
    return (t, x1 ^ x2, z1 ^ z2)


def pauli_adjoint(p):
    t, x, z = p
    return ((-t - 2 * bin(x & z).count("1")) % 4, x, z)


def anticommutes(a, b) -> bool:
    _, x1, z1 = a
    _, x2, z2 = b
    return (bin(x1 & z2).count("1") + bin(z1 & x2).count("1")) % 2 == 1


# Images of X_q and Z_q under single-qubit Cliffords: (t, has_x, has_z).
_IMG_1Q = {
    "H": {"X": (0, 0, 1), "Z": (0, 1, 0)},
    "S": {"X": (1, 1, 1), "Z": (0, 0, 1)},
    "Sdg": {"X": (3, 1, 1), "Z": (0, 0, 1)},
    "X": {"X": (0, 1, 0), "Z": (2, 0, 1)},
    "Y": {"X": (2, 1, 0), "Z": (2, 0, 1)},
    "Z": {"X": (2, 1, 0), "Z": (0, 0, 1)},
}


class HybridState:
    def __init__(self, n_qubits: int, leaf_qubits, tgt_state: np.ndarray | None = None):
        self.n_qubits = n_qubits
        # destabilizers D_j = X_j, stabilizers S_j = Z_j
        self.destab = [(0, 1 << j, 0) for j in range(n_qubits)]
        self.stab = [(0, 0, 1 << j) for j in range(n_qubits)]
        self.coords = VectorTreeState(n_qubits, leaf_qubits, tgt_state)
        self.tree_gate_count = 0
        self.survival = 1.0

    # -- Clifford conjugation ------------------------------------------------

    def _conjugate_rows(self, images: dict) -> None:
        """images: qubit-embedded {('X'|'Z', qubit): global pauli tuple}."""
        qubits = sorted({q for (_, q) in images})
        qmask = 0
        for q in qubits:
            qmask |= 1 << q
        for rows in (self.destab, self.stab):
            for i, (t, x, z) in enumerate(rows):
                if not ((x | z) & qmask):
                    continue
                stripped = (t, x & ~qmask, z & ~qmask)
                local = (0, 0, 0)
                for q in qubits:
                    if x & (1 << q):
                        local = pauli_mul(local, images[("X", q)])
                for q in qubits:
                    if z & (1 << q):
                        local = pauli_mul(local, images[("Z", q)])
                rows[i] = pauli_mul(stripped, local)

    def _clifford(self, g: Gate) -> None:
        kind = g.kind
        if kind in _IMG_1Q:
            q = g.qubits[0]
            table = _IMG_1Q[kind]
            images = {}
            for sym in ("X", "Z"):
                t, hx, hz = table[sym]
                images[(sym, q)] = (t, hx << q, hz << q)
            self._conjugate_rows(images)
            return
        if kind == "CNOT":
            c, t = g.qubits
            images = {
                ("X", c): (0, (1 << c) | (1 << t), 0),
                ("Z", c): (0, 0, 1 << c),
                ("X", t): (0, 1 << t, 0),
                ("Z", t): (0, 0, (1 << c) | (1 << t)),
            }
            self._conjugate_rows(images)
            return
        if kind == "CZ":
            a, b = g.qubits
            images = {
                ("X", a): (0, 1 << a, 1 << b),
                ("Z", a): (0, 0, 1 << a),
                ("X", b): (0, 1 << b, 1 << a),
                ("Z", b): (0, 0, 1 << b),
            }
            self._conjugate_rows(images)
            return
        if kind == "SWAP":
            a, b = g.qubits
            images = {
                ("X", a): (0, 1 << b, 0),
                ("Z", a): (0, 0, 1 << b),
                ("X", b): (0, 1 << a, 0),
                ("Z", b): (0, 0, 1 << a),
            }
            self._conjugate_rows(images)
            return
        raise ValueError(f"not a Clifford gate: {kind}")

    # -- non-Clifford path ----------------------------------------------------

    def _local_pauli_terms(self, g):
        mat = _matrix_of(g)
        k = len(g.qubits)
        dim = 2**k
        terms = []
        for xb in range(dim):
            for zb in range(dim):
                # P = prod_i (X^x Z^z) on operand i (operand i = bit i)
                p = np.ones(1, dtype=complex)
                for i in range(k):
                    xi, zi = (xb >> i) & 1, (zb >> i) & 1
                    m = np.eye(2, dtype=complex)
                    if zi:
                        m = np.diag([1, -1]).astype(complex) @ m
                    if xi:
                        m = np.array([[0, 1], [1, 0]], dtype=complex) @ m
                    p = np.kron(m, p)
                beta = np.trace(p.conj().T @ mat) / dim
                if abs(beta) > 1e-14:
                    terms.append((beta, xb, zb))
        return terms

    def _coordinate_terms(self, g: Gate):
        out = []
        for beta, xb, zb in self._local_pauli_terms(g):
            gx = gz = 0
            for i, q in enumerate(g.qubits):
                if (xb >> i) & 1:
                    gx |= 1 << q
                if (zb >> i) & 1:
                    gz |= 1 << q
            P = (0, gx, gz)
            y = 0
            for j in range(self.n_qubits):
                if anticommutes(P, self.stab[j]):
                    y |= 1 << j
            dy = (0, 0, 0)
            for j in range(self.n_qubits):
                if y & (1 << j):
                    dy = pauli_mul(dy, self.destab[j])
            r = pauli_mul(pauli_adjoint(dy), P)
            z = 0
            for j in range(self.n_qubits):
                if anticommutes(r, self.destab[j]):
                    z |= 1 << j
            sz = (0, 0, 0)
            for j in range(self.n_qubits):
                if z & (1 << j):
                    sz = pauli_mul(sz, self.stab[j])
            resid = pauli_mul(r, pauli_adjoint(sz))
            if resid[1] != 0 or resid[2] != 0:
                raise AssertionError("tableau decomposition failed")
            alpha = 1j ** resid[0]
            u = 0
            for j in range(self.n_qubits):
                if anticommutes(P, self.destab[j]):
                    u |= 1 << j
            out.append((beta * alpha, y, u))
        return out

    # -- public protocol -------------------------------------------------------

    def apply_gate(self, g: Gate) -> None:
        if g.kind in CLIFFORD_KINDS:
            self._clifford(g)
            return
        if g.kind == "ProjectZero":
            self.project_zero(g.qubits[0])
            return
        self.tree_gate_count += 1
        self.coords.apply_coordinate_terms(self._coordinate_terms(g))

    def apply_matrix(self, mat: np.ndarray, qubits) -> None:
        g = _MatrixGate(mat, tuple(qubits))
        self.tree_gate_count += 1
        self.coords.apply_coordinate_terms(self._coordinate_terms(g))

    def project_zero(self, qubit: int) -> float:
        before = self.coords.norm_sq()
        if before == 0.0:
            self.survival = 0.0
            return 0.0
        # (I + Z_q)/2 via the generic coordinate path
        g = _MatrixGate(np.diag([1.0, 0.0]).astype(complex), (qubit,))
        self.coords.apply_coordinate_terms(self._coordinate_terms(g))
        after = self.coords.norm_sq()
        mass = after / before
        if after > 0:
            scale = 1.0 / math.sqrt(mass)
            for entry in self.coords.branches.values():
                entry[0] *= scale
        self.survival *= mass
        return mass

    def norm_sq(self) -> float:
        return self.coords.norm_sq()

    # -- reconstruction --------------------------------------------------------

    def _stabilizer_dense(self) -> np.ndarray:
        dim = 2**self.n_qubits
        for start in range(dim):
            v = np.zeros(dim, dtype=complex)
            v[start] = 1.0
            for row in self.stab:
                v = 0.5 * (v + _apply_pauli_dense(row, v))
            nrm = np.linalg.norm(v)
            if nrm > 1e-9:
                v /= nrm
                # canonical phase: first nonzero amplitude real positive
                for a in v:
                    if abs(a) > 1e-12:
                        v *= np.conj(a) / abs(a)
                        break
                return v
        raise AssertionError("inconsistent stabilizer tableau")

    def to_dense(self) -> np.ndarray:
        """Dense reconstruction, canonical up to one global phase."""
        psi_s = self._stabilizer_dense()
        out = np.zeros_like(psi_s)
        coords = self.coords
        for key, (w, leaf) in coords.branches.items():
            for li in range(coords.leaf_dim):
                amp = w * leaf[li]
                if amp == 0:
                    continue
                x = 0
                for q in coords.link_qubits:
                    if key & (1 << coords.link_pos[q]):
                        x |= 1 << q
                for q in coords.leaf_qubits:
                    if li & (1 << coords.leaf_pos[q]):
                        x |= 1 << q
                dx = (0, 0, 0)
                for j in range(self.n_qubits):
                    if x & (1 << j):
                        dx = pauli_mul(dx, self.destab[j])
                out += amp * _apply_pauli_dense(dx, psi_s)
        return out


class _MatrixGate:
    """Ad-hoc gate wrapper so arbitrary matrices ride the Pauli-sum path."""

    def __init__(self, mat: np.ndarray, qubits: tuple):
        self.kind = "_matrix"
        self.qubits = qubits
        self.angle = None
        self._mat = mat


def _matrix_of(g) -> np.ndarray:
    if isinstance(g, _MatrixGate):
        return g._mat
    return gate_matrix(g.kind, g.angle, len(g.qubits))


def _apply_pauli_dense(p, v: np.ndarray) -> np.ndarray:
    t, x, z = p
    dim = len(v)
    idx = np.arange(dim)
    if z:
        signs = (-1.0) ** _popcount(idx & z)
        v = v * signs
    if x:
        v = v[idx ^ x]
    return (1j**t) * v


def _popcount(arr: np.ndarray) -> np.ndarray:
    out = np.zeros_like(arr)
    a = arr.copy()
    while a.any():
        out += a & 1
        a >>= 1
    return out
