"""Vector-tree state: branch-indexed link qubits over leaf amplitude arrays.

The state is held as an occupancy-adaptive set of branches, each a link-bit
key with a complex weight and a dense amplitude array over the fixed leaf
subset (the TGT register in QSP runs, where amplitudes stay dense while the
control structure stays sparse).  Diagonal gates on link qubits touch only
the branch weights; permutation gates relabel keys; everything else runs
through a generic grouped-block path that reuses the dense kernels.
Unpopulated branches are pruned below amplitude norm 1e-15.
"""

from __future__ import annotations

import math

import numpy as np

from ..gates import Gate, gate_matrix
from .dense import apply_gate_to_array, apply_matrix_to_array

__all__ = ["VectorTreeState"]

PRUNE_NORM = 1e-15

_DIAG_1Q = {
    "Z": np.array([1, -1], dtype=complex),
    "S": np.array([1, 1j], dtype=complex),
    "Sdg": np.array([1, -1j], dtype=complex),
    "T": np.array([1, np.exp(1j * math.pi / 4)], dtype=complex),
    "Tdg": np.array([1, np.exp(-1j * math.pi / 4)], dtype=complex),
}


class VectorTreeState:
    def __init__(self, n_qubits: int, leaf_qubits, tgt_state: np.ndarray | None = None):
        self.n_qubits = n_qubits
        self.leaf_qubits = tuple(sorted(leaf_qubits))
        self.link_qubits = tuple(q for q in range(n_qubits) if q not in self.leaf_qubits)
        self.leaf_pos = {q: i for i, q in enumerate(self.leaf_qubits)}
        self.link_pos = {q: i for i, q in enumerate(self.link_qubits)}
        self.n_leaf = len(self.leaf_qubits)
        self.leaf_dim = 2**self.n_leaf
        leaf = np.zeros(self.leaf_dim, dtype=complex)
        if tgt_state is not None:
            leaf[: len(tgt_state)] = tgt_state
        else:
            leaf[0] = 1.0
        # branches: link key -> [weight, leaf array]
        self.branches: dict = {0: [1.0 + 0j, leaf]}
        self.leaf_mutations = 0
        self.link_phase_updates = 0
        self.survival = 1.0

    # -- helpers ------------------------------------------------------------

    def _classify(self, qubits):
        links = [q for q in qubits if q in self.link_pos]
        leaves = [q for q in qubits if q in self.leaf_pos]
        return links, leaves

    def norm_sq(self) -> float:
        return float(
            sum(abs(w) ** 2 * float(np.vdot(leaf, leaf).real) for w, leaf in self.branches.values())
        )

    def prune(self) -> None:
        dead = [k for k, (w, leaf) in self.branches.items()
                if abs(w) ** 2 * float(np.vdot(leaf, leaf).real) < PRUNE_NORM**2]
        for k in dead:
            del self.branches[k]

    def branch_count(self) -> int:
        return len(self.branches)

    # -- gate application ---------------------------------------------------

    def apply_gate(self, g: Gate) -> None:
        links, leaves = self._classify(g.qubits)
        if not links:
            remapped = Gate(kind=g.kind, qubits=tuple(self.leaf_pos[q] for q in g.qubits),
                            angle=g.angle)
            for entry in self.branches.values():
                entry[1] = apply_gate_to_array(entry[1], remapped, self.n_leaf)
                self.leaf_mutations += 1
            return
        if not leaves:
            if self._try_link_only(g):
                return
        if self._try_link_controlled(g, links, leaves):
            return
        mat = gate_matrix(g.kind, g.angle, len(g.qubits))
        self.apply_matrix(mat, g.qubits)

    def _try_link_only(self, g: Gate) -> bool:
        kind = g.kind
        if kind in _DIAG_1Q or kind == "Rz":
            b = 1 << self.link_pos[g.qubits[0]]
            if kind == "Rz":
                lo, hi = np.exp(-0.5j * g.angle), np.exp(0.5j * g.angle)
            else:
                lo, hi = _DIAG_1Q[kind]
            for key, entry in self.branches.items():
                entry[0] *= hi if (key & b) else lo
                self.link_phase_updates += 1
            return True
        if kind == "CZ":
            b = (1 << self.link_pos[g.qubits[0]]) | (1 << self.link_pos[g.qubits[1]])
            for key, entry in self.branches.items():
                if key & b == b:
                    entry[0] *= -1
                self.link_phase_updates += 1
            return True
        if kind == "ProjectZero":
            b = 1 << self.link_pos[g.qubits[0]]
            for key in [k for k in self.branches if k & b]:
                del self.branches[key]
            return True
        if kind in ("X", "Y"):
            b = 1 << self.link_pos[g.qubits[0]]
            new = {}
            for key, (w, leaf) in self.branches.items():
                if kind == "Y":
                    w = w * (1j if not (key & b) else -1j)
                new[key ^ b] = [w, leaf]
            self.branches = new
            return True
        if kind == "SWAP":
            b0 = 1 << self.link_pos[g.qubits[0]]
            b1 = 1 << self.link_pos[g.qubits[1]]
            new = {}
            for key, entry in self.branches.items():
                k = key
                v0, v1 = bool(k & b0), bool(k & b1)
                k = (k & ~(b0 | b1)) | (b0 if v1 else 0) | (b1 if v0 else 0)
                new[k] = entry
            self.branches = new
            return True
        if kind in ("CNOT", "Toffoli3", "ToffoliN"):
            *controls, target = g.qubits
            cmask = 0
            for c in controls:
                cmask |= 1 << self.link_pos[c]
            tb = 1 << self.link_pos[target]
            new = {}
            for key, entry in self.branches.items():
                k = key ^ tb if (key & cmask) == cmask else key
                new[k] = entry
            self.branches = new
            return True
        return False

    def _try_link_controlled(self, g: Gate, links, leaves) -> bool:
        """Controlled-X family / CZ with all controls on links, target on a leaf."""
        if g.kind in ("CNOT", "Toffoli3", "ToffoliN"):
            *controls, target = g.qubits
            if target in self.leaf_pos and all(c in self.link_pos for c in controls):
                cmask = 0
                for c in controls:
                    cmask |= 1 << self.link_pos[c]
                sub = Gate(kind="X", qubits=(self.leaf_pos[target],))
                for key, entry in self.branches.items():
                    if key & cmask == cmask:
                        entry[1] = apply_gate_to_array(entry[1], sub, self.n_leaf)
                        self.leaf_mutations += 1
                return True
        if g.kind == "CZ" and len(links) == 1 and len(leaves) == 1:
            b = 1 << self.link_pos[links[0]]
            sub = Gate(kind="Z", qubits=(self.leaf_pos[leaves[0]],))
            for key, entry in self.branches.items():
                if key & b:
                    entry[1] = apply_gate_to_array(entry[1], sub, self.n_leaf)
                    self.leaf_mutations += 1
            return True
        return False

    def apply_matrix(self, mat: np.ndarray, qubits) -> None:
        """Generic path: group branches over the gate's link bits, apply the
        matrix on a stacked (link-bits + leaf) block, and redistribute."""
        links, leaves = self._classify(qubits)
        kl = len(links)
        lmask = 0
        for q in links:
            lmask |= 1 << self.link_pos[q]
        virtual = {q: self.leaf_pos[q] for q in leaves}
        for i, q in enumerate(links):
            virtual[q] = self.n_leaf + i
        vqubits = tuple(virtual[q] for q in qubits)
        groups: dict = {}
        for key, (w, leaf) in self.branches.items():
            groups.setdefault(key & ~lmask, {})[key & lmask] = (w, leaf)
        newbranches: dict = {}
        for base, members in groups.items():
            block = np.zeros((2**kl) * self.leaf_dim, dtype=complex)
            for sub, (w, leaf) in members.items():
                # position of this sub-key within the virtual register
                pos = 0
                for i, q in enumerate(links):
                    if sub & (1 << self.link_pos[q]):
                        pos |= 1 << i
                block[pos * self.leaf_dim : (pos + 1) * self.leaf_dim] = w * leaf
            block = apply_matrix_to_array(block, mat, vqubits, self.n_leaf + kl)
            self.leaf_mutations += 1
            for pos in range(2**kl):
                chunk = block[pos * self.leaf_dim : (pos + 1) * self.leaf_dim]
                nrm = float(np.vdot(chunk, chunk).real)
                if nrm < PRUNE_NORM**2:
                    continue
                sub = 0
                for i, q in enumerate(links):
                    if pos & (1 << i):
                        sub |= 1 << self.link_pos[q]
                newbranches[base | sub] = [1.0 + 0j, chunk.copy()]
        self.branches = newbranches

    def apply_coordinate_terms(self, terms) -> None:
        """Apply sum_i scalar_i * X^{y_i} Z^{u_i} over the branch/leaf index
        coordinates (used by the stabilizer hybrid)."""
        out: dict = {}
        idx = np.arange(self.leaf_dim)
        for scalar, y, u in terms:
            y_link = 0
            y_leaf = 0
            u_link = 0
            u_leaf = 0
            for q in self.link_qubits:
                b = 1 << q
                if y & b:
                    y_link |= 1 << self.link_pos[q]
                if u & b:
                    u_link |= 1 << self.link_pos[q]
            for q in self.leaf_qubits:
                b = 1 << q
                if y & b:
                    y_leaf |= 1 << self.leaf_pos[q]
                if u & b:
                    u_leaf |= 1 << self.leaf_pos[q]
            signs = 1.0 if u_leaf == 0 else (-1.0) ** _popcount_arr(idx & u_leaf)
            perm = idx ^ y_leaf
            for key, (w, leaf) in self.branches.items():
                link_sign = -1.0 if bin(key & u_link).count("1") % 2 else 1.0
                contrib = (scalar * link_sign * w) * (signs * leaf)
                tkey = key ^ y_link
                tgt = out.get(tkey)
                acc = np.zeros(self.leaf_dim, dtype=complex) if tgt is None else tgt[1]
                acc[perm] += contrib
                out[tkey] = [1.0 + 0j, acc]
        self.leaf_mutations += 1
        self.branches = out
        self.prune()

    # -- projection and reconstruction --------------------------------------

    def project_zero(self, qubit: int) -> float:
        before = self.norm_sq()
        if before == 0.0:
            self.survival = 0.0
            return 0.0
        if qubit in self.link_pos:
            b = 1 << self.link_pos[qubit]
            for key in [k for k in self.branches if k & b]:
                del self.branches[key]
        else:
            sub = Gate(kind="ProjectZero", qubits=(self.leaf_pos[qubit],))
            for entry in self.branches.values():
                entry[1] = apply_gate_to_array(entry[1], sub, self.n_leaf)
                self.leaf_mutations += 1
            self.prune()
        after = self.norm_sq()
        mass = after / before
        if after > 0:
            scale = 1.0 / math.sqrt(mass)
            for entry in self.branches.values():
                entry[0] *= scale
        self.survival *= mass
        return mass

    def to_dense(self) -> np.ndarray:
        out = np.zeros(2**self.n_qubits, dtype=complex)
        for key, (w, leaf) in self.branches.items():
            base = 0
            for q in self.link_qubits:
                if key & (1 << self.link_pos[q]):
                    base |= 1 << q
            for li in range(self.leaf_dim):
                if leaf[li] == 0:
                    continue
                full = base
                for q in self.leaf_qubits:
                    if li & (1 << self.leaf_pos[q]):
                        full |= 1 << q
                out[full] += w * leaf[li]
        return out


def _popcount_arr(arr: np.ndarray) -> np.ndarray:
    out = np.zeros_like(arr)
    a = arr.copy()
    while a.any():
        out += a & 1
        a >>= 1
    return out
