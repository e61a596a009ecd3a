"""Explicit QSP circuit construction and structural optimization.

Builders produce the three qubitization fragments:

* PREP (and its adjoint): the coefficient-loading projector, a cascade of
  uniformly-controlled Ry layers (Gray-code form), costing exactly 2^d - 1
  rotations and 2^d - 2 CNOTs.
* SELECT: the index-conditioned Pauli applicator, a staircase of AND
  ancillas walked across all 2^d indices with merged polarity-flip gadgets
  (one CNOT for every other step, one Toffoli + two CNOTs for every fourth,
  and so on).  Conditioning on the signal qubit's |-> state is realized by
  Hadamard basis changes that the peephole pass later folds.
* The conditioned reflection 2|0><0| - 1, a logarithmic-depth tree of
  3-qubit Toffolis over active-low controls; adjacent queries share the
  tree so each half costs d - 1 Toffolis.

`assemble_qsp` interleaves m alternating queries with the m + 1 signal-qubit
rotations, absorbing the control-state preparation into the first and last
queries and annihilating the projector pairs between adjacent queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .gates import (
    ROTATION_KINDS,
    BuildOptions,
    Circuit,
    G,
    Gate,
    circuit_adjoint,
    gate_matrix,
)
from .hamiltonian import HamiltonianLCU

__all__ = [
    "build_prep",
    "build_select",
    "build_reflection",
    "assemble_qsp",
    "apply_echo_and_symmetrize",
    "decompose_toffoli",
    "peephole_optimize",
    "count_resources",
    "ResourceCounts",
    "PhaseUnsafeContextError",
    "prep_rotation_angles",
    "expected_fragment_counts",
]


class PhaseUnsafeContextError(RuntimeError):
    """A relative-phase Toffoli substitution was requested outside a
    compute/uncompute pair that would cancel the phase."""


# ---------------------------------------------------------------------------
# PREP: cascade of uniformly controlled Ry layers.


def prep_rotation_angles(alphas: np.ndarray) -> list:
    """Per-layer angle tables for loading sqrt(|alpha|) amplitudes.

    Layer j (1-based) targets control bit j-1 conditioned on bits 0..j-2;
    its table has 2^(j-1) entries derived from pairwise sums of |alpha|.
    """
    mags = np.abs(np.asarray(alphas, dtype=float))
    d = int(round(math.log2(len(mags))))
    if 2**d != len(mags):
        raise ValueError("coefficient vector must have power-of-two length")
    levels = [mags]
    for j in range(d, 0, -1):
        cur = levels[-1]
        half = len(cur) // 2
        levels.append(cur[:half] + cur[half:])
    levels.reverse()  # levels[j] has 2^j entries
    tables = []
    for j in range(1, d + 1):
        upper = levels[j]
        lower = levels[j - 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(lower > 0, upper[: 2 ** (j - 1)] / np.where(lower > 0, lower, 1.0), 1.0)
        ratio = np.clip(ratio, 0.0, 1.0)
        tables.append(2.0 * np.arccos(np.sqrt(ratio)))
    return tables


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _ucry(angles: np.ndarray, controls: list, target: int, tag: str, query: int) -> list:
    """Uniformly controlled Ry via the Gray-code construction:
    2^r rotations and 2^r CNOTs for r >= 1 controls (one rotation, no CNOT
    for r = 0)."""
    r = len(controls)
    if r == 0:
        return [G("Ry", target, angle=float(angles[0]), tag=tag, query=query)]
    size = 1 << r
    thetas = np.empty(size)
    for i in range(size):
        gi = _gray(i)
        acc = 0.0
        for k in range(size):
            sign = -1.0 if bin(gi & k).count("1") % 2 else 1.0
            acc += sign * angles[k]
        thetas[i] = acc / size
    out = []
    for i in range(size):
        out.append(G("Ry", target, angle=float(thetas[i]), tag=tag, query=query))
        ctrl = controls[_ctz(i + 1)] if i < size - 1 else controls[r - 1]
        out.append(G("CNOT", ctrl, target, tag=tag, query=query))
    return out


def _ctz(x: int) -> int:
    return (x & -x).bit_length() - 1


def build_prep(
    lcu: HamiltonianLCU,
    adjoint: bool = False,
    query: int = 0,
    flip_mask: int = 0,
    xor_mask: int = 0,
    circuit: Circuit | None = None,
) -> list:
    """Gate list loading |alpha> = sum sqrt(|alpha_k|/scale)|k> onto CTL.

    The echo-conjugated projector is obtained structurally: flip_mask
    negates the angles of every rotation targeting a flagged CTL bit (bits
    carrying X or Z correction letters), and xor_mask permutes the control
    tables of higher layers (bits whose correction letter has an X
    component flip the layer's control polarity).
    """
    d = lcu.d
    base = lcu.n  # ctl(j) = n + j
    if d == 0:
        return []
    tables = prep_rotation_angles(lcu.alphas())
    gates: list = []
    for j in range(1, d + 1):
        angles = tables[j - 1]
        perm = xor_mask & ((1 << (j - 1)) - 1)
        if perm:
            idx = np.arange(len(angles)) ^ perm
            angles = angles[idx]
        if (flip_mask >> (j - 1)) & 1:
            angles = -angles
        controls = [base + b for b in range(j - 1)]
        gates.extend(_ucry(angles, controls, base + j - 1, "PREP", query))
    if adjoint:
        gates = circuit_adjoint(gates)
    return gates


# ---------------------------------------------------------------------------
# SELECT: staircase over indices with merged polarity-flip gadgets.


def _bit(k: int, j: int) -> int:
    return (k >> j) & 1


class _SelectEmitter:
    def __init__(
        self,
        lcu: HamiltonianLCU,
        circuit_like: Circuit,
        query: int,
        index_xor: int = 0,
        low_polarity: str = "xwrap",
    ):
        self.lcu = lcu
        self.c = circuit_like
        self.query = query
        self.index_xor = index_xor
        self.low_polarity = low_polarity
        self.gates: list = []
        self.d = lcu.d
        # Target qubits currently held in the S-conjugated frame, in which a
        # controlled-Y letter is a plain CNOT.  Diagonal letters commute with
        # the frame; only X letters force closing it.
        self.rotated: set = set()

    def parent(self, level: int) -> int:
        return self.c.anc(level + 1) if level + 1 <= self.d - 1 else self.c.phs()

    def toffoli(self, level: int, bit: int, pair: int | None = None) -> None:
        cq = self.c.ctl(level)
        if bit == 0 and self.low_polarity == "cx":
            # a ^= p AND (not c)  ==  a ^= p; a ^= p AND c
            self.gates.append(G("CNOT", self.parent(level), self.c.anc(level), tag="SELECT", query=self.query))
            self.gates.append(
                G("Toffoli3", self.parent(level), cq, self.c.anc(level), tag="SELECT", query=self.query, pair=pair)
            )
            return
        if bit == 0:
            self.gates.append(G("X", cq, tag="SELECT", query=self.query))
        self.gates.append(
            G("Toffoli3", self.parent(level), cq, self.c.anc(level), tag="SELECT", query=self.query, pair=pair)
        )
        if bit == 0:
            self.gates.append(G("X", cq, tag="SELECT", query=self.query))

    def ascent(self, k: int) -> None:
        for level in range(self.d - 1, -1, -1):
            self.toffoli(level, _bit(k, level))

    def descent(self, k: int) -> None:
        for level in range(self.d):
            self.toffoli(level, _bit(k, level))

    def letters(self, k: int) -> None:
        idx = (k ^ self.index_xor) % len(self.lcu.terms)
        alpha, pstr = self.lcu.terms[idx]
        hook = self.c.anc(0) if self.d >= 1 else self.c.phs()
        tag, q = "SELECT", self.query
        if alpha == 0.0:
            return
        if alpha < 0:
            self.gates.append(G("Z", hook, tag=tag, query=q))
        for qu, letter in enumerate(pstr.letters):
            tq = self.c.tgt(qu)
            if letter == "X":
                if tq in self.rotated:
                    self.gates.append(G("S", tq, tag=tag, query=q))
                    self.rotated.discard(tq)
                self.gates.append(G("CNOT", hook, tq, tag=tag, query=q))
            elif letter == "Z":
                self.gates.append(G("CZ", hook, tq, tag=tag, query=q))
            elif letter == "Y":
                if tq not in self.rotated:
                    self.gates.append(G("Sdg", tq, tag=tag, query=q))
                    self.rotated.add(tq)
                self.gates.append(G("CNOT", hook, tq, tag=tag, query=q))

    def close_frames(self) -> None:
        for tq in sorted(self.rotated):
            self.gates.append(G("S", tq, tag="SELECT", query=self.query))
        self.rotated.clear()

    def step(self, k: int) -> None:
        """Move the computed AND chain from index k to k+1."""
        t = _trailing_ones(k) + 1
        anc = self.c.anc
        if t == 1:
            self.gates.append(G("CNOT", self.parent(0), anc(0), tag="SELECT", query=self.query))
            return
        # uncompute levels 0..t-3 (their bits in k are 1: active-high)
        for level in range(0, t - 2):
            self.toffoli(level, 1)
        # double polarity-flip gadget on levels (t-1, t-2)
        top, sub = t - 1, t - 2
        self.gates.append(G("CNOT", anc(top), anc(sub), tag="SELECT", query=self.query))
        self.toffoli_sub_gadget(sub)
        self.gates.append(G("CNOT", self.parent(top), anc(top), tag="SELECT", query=self.query))
        # recompute levels t-3..0 with the new bits (all 0: active-low)
        for level in range(t - 3, -1, -1):
            self.toffoli(level, 0)

    def toffoli_sub_gadget(self, sub: int) -> None:
        # Toffoli(grandparent, ctl(sub) active-low, anc(sub)).
        cq = self.c.ctl(sub)
        gp = self.parent(sub + 1)
        if self.low_polarity == "cx":
            self.gates.append(G("CNOT", gp, self.c.anc(sub), tag="SELECT", query=self.query))
            self.gates.append(G("Toffoli3", gp, cq, self.c.anc(sub), tag="SELECT", query=self.query))
            return
        self.gates.append(G("X", cq, tag="SELECT", query=self.query))
        self.gates.append(G("Toffoli3", gp, cq, self.c.anc(sub), tag="SELECT", query=self.query))
        self.gates.append(G("X", cq, tag="SELECT", query=self.query))


def _trailing_ones(k: int) -> int:
    t = 0
    while k & 1:
        t += 1
        k >>= 1
    return t


def build_select(
    lcu: HamiltonianLCU,
    close: bool = True,
    query: int = 0,
    index_xor: int = 0,
    circuit: Circuit | None = None,
    low_polarity: str = "xwrap",
) -> list:
    """Signal-conditioned SELECT: applies the k-th (optionally index-XORed)
    signed Pauli term for CTL index k, conditioned on the signal qubit.

    Emitted in the computational frame (caller wraps the signal qubit in
    Hadamards).  With close=True the AND staircase is fully uncomputed,
    leaving the ancillas clean.  low_polarity chooses how active-low
    controls are realized: "xwrap" conjugates the control with X gates (the
    form whose structural CNOT count is exactly 3*2^(d-1) - 2), while "cx"
    uses the XOR identity [a ^= p AND NOT c] = [a ^= p][a ^= p AND c],
    trading the two X gates for one CNOT (used by circuit assembly).
    """
    c = circuit or Circuit(n=lcu.n, d=lcu.d, gates=[])
    d = lcu.d
    if d == 0:
        # Single-term signal: letters conditioned on the signal qubit alone.
        em = _SelectEmitter(lcu, c, query, index_xor, low_polarity)
        em.letters(0)
        em.close_frames()
        return em.gates
    em = _SelectEmitter(lcu, c, query, index_xor, low_polarity)
    L = 2**d
    # Zero-padding terms are exact identities, so the walk stops at the last
    # index holding a real term; unvisited indices never set the AND chain
    # and therefore receive the identity exactly.
    k_last = 0
    for k in range(L):
        if lcu.terms[(k ^ index_xor) % len(lcu.terms)][0] != 0.0:
            k_last = k
    em.ascent(0)
    for k in range(k_last + 1):
        em.letters(k)
        if k < k_last:
            em.step(k)
    em.close_frames()
    if close:
        em.descent(k_last)
    return em.gates


# ---------------------------------------------------------------------------
# Conditioned reflection: Toffoli tree over active-low controls.


_pair_counter = [0]


def _next_pair() -> int:
    _pair_counter[0] += 1
    return _pair_counter[0]


def build_reflection(
    d: int,
    circuit: Circuit | None = None,
    query: int = 0,
) -> list:
    """Standalone signal-conditioned reflection about CTL |0..0>.

    Realized as X on the signal qubit times a multi-control Toffoli tree
    over active-low controls (the |+->-basis X-eigenstructure makes the
    X-targeting form condition correctly without basis changes).  Tree
    Toffolis carry matched pair tokens (compute/uncompute), marking them
    phase-safe for the pseudo-decomposition; assembly emits the shared-tree
    half form instead and absorbs the X into a neighboring rotation.
    """
    if d < 1:
        return []
    c = circuit or Circuit(n=0, d=d, gates=[])
    phs = c.phs()
    wraps = [G("X", c.ctl(j), tag="REFL", query=query) for j in range(d)]
    nodes = [c.ctl(j) for j in range(d)]
    up = []
    anc_next = 0
    while len(nodes) > 2:
        a, b = nodes.pop(0), nodes.pop(0)
        up.append(G("Toffoli3", a, b, c.anc(anc_next), tag="REFL", query=query, pair=_next_pair()))
        nodes.append(c.anc(anc_next))
        anc_next += 1
    if len(nodes) == 2:
        final = G("Toffoli3", nodes[0], nodes[1], phs, tag="REFL", query=query)
    else:
        final = G("CNOT", nodes[0], phs, tag="REFL", query=query)
    down = [replace(g, pair=g.pair) for g in reversed(up)]
    return [G("X", phs, tag="REFL", query=query)] + wraps + up + [final] + down + wraps


# ---------------------------------------------------------------------------
# Full assembly.


_CONVENTION = {
    # Pinned by dense-oracle tests against the target response (see tests):
    "odd_axis": "Ry",
    "odd_sign": -1.0,
    "even_sign": 1.0,
}


def assemble_qsp(lcu: HamiltonianLCU, phases, opts: BuildOptions | None = None) -> Circuit:
    """Complete depth-m QSP circuit for the LCU-encoded signal operator.

    m alternating queries of the qubitized signal unitary and its adjoint,
    interleaved with the m+1 signal-qubit rotations; the first/last queries
    absorb the control-register preparation, projector pairs annihilate
    between adjacent queries, and reflection halves share their AND tree.
    Odd-index rotations are emitted on the substituted axis recorded in the
    phase sequence (removing the walk operator's imaginary eigenphase).
    """
    opts = opts or BuildOptions()
    m = phases.m
    if m % 2 != 0 or m < 2:
        raise ValueError("query depth must be even and >= 2")
    opts.validate(lcu.d)
    d = lcu.d
    circ = Circuit(n=lcu.n, d=d, gates=[], meta={
        "m": m,
        "tau": phases.tau,
        "eps_baked": float(phases.eps_baked),
        "opts": opts,
    })
    circ.meta["lcu"] = lcu
    circ.meta["phases"] = phases
    phs = circ.phs()
    ph = [float(p) for p in phases.phases]
    odd_sub = phases.odd_axis_substitution

    prep_mask, prep_xor, prep_wrap = _echo_prep_mask(opts.echo_prep)
    sel_xor, sel_wrap = _echo_select_masks(opts.echo_select)

    def rot(k: int, sign: float = 1.0) -> Gate:
        if k % 2 == 1 and odd_sub:
            return G(_CONVENTION["odd_axis"], phs, angle=_CONVENTION["odd_sign"] * sign * ph[k],
                     tag="PHS", query=k)
        return G("Rz", phs, angle=_CONVENTION["even_sign"] * sign * ph[k], tag="PHS", query=k)

    def prep(q: int) -> list:
        use_echo = opts.echo_prep is not None and _echo_applies_prep(q, m, opts.symmetrize, adjoint=False)
        gates = build_prep(lcu, adjoint=False, query=q,
                           flip_mask=prep_mask if use_echo else 0,
                           xor_mask=prep_xor if use_echo else 0, circuit=circ)
        if use_echo:
            w = _pauli_wrap_gates(prep_wrap, circ, "PREP", q)
            gates = w + gates + w
        return gates

    def unprep(q: int) -> list:
        use_echo = opts.echo_prep is not None and _echo_applies_prep(q, m, opts.symmetrize, adjoint=True)
        gates = build_prep(lcu, adjoint=True, query=q,
                           flip_mask=prep_mask if use_echo else 0,
                           xor_mask=prep_xor if use_echo else 0, circuit=circ)
        if use_echo:
            w = _pauli_wrap_gates(prep_wrap, circ, "PREP", q)
            gates = w + gates + w
        return gates

    def select(q: int) -> list:
        use_echo = opts.echo_select is not None and _echo_applies_select(q, m, opts.symmetrize)
        xor = sel_xor if use_echo else 0
        inner = build_select(lcu, close=True, query=q, index_xor=xor, circuit=circ)
        if use_echo:
            w = _pauli_wrap_gates(sel_wrap, circ, "SELECT", q)
            inner = w + inner + w
        hh = G("H", phs, tag="SELECT", query=q)
        return [hh] + inner + [hh]

    gates: list = [G("H", phs, tag="OTHER", query=0), rot(0)]
    for q in range(1, m + 1):
        if q == 1:
            gates += prep(1)
        if q % 2 == 1:
            gates += select(q)
            gates.append(rot(q))
        else:
            gates += select(q)
            gates += unprep(q)
            if q < m:
                gates += _reflection_half(circ, d, q, up=True)
                # The two absorbed signal-qubit X's negate this rotation.
                gates.append(rot(q, sign=-1.0 if d >= 1 else 1.0))
                gates += _reflection_half(circ, d, q + 1, up=False)
                gates += prep(q + 1)
            else:
                gates.append(rot(m))
                gates.append(G("H", phs, tag="OTHER", query=m))
                gates.append(G("ProjectZero", phs, tag="OTHER", query=m))
                for j in range(d):
                    gates.append(G("ProjectZero", circ.ctl(j), tag="OTHER", query=m))
    circ.gates = gates
    circ.validate()
    if opts.decompose_toffoli:
        circ = decompose_toffoli(circ)
    if opts.peephole:
        circ = peephole_optimize(circ)
    return circ


def _reflection_half(circ: Circuit, d: int, query: int, up: bool) -> list:
    if d < 1:
        return []
    phs = circ.phs()
    wraps = [G("X", circ.ctl(j), tag="REFL", query=query) for j in range(d)]
    nodes = [circ.ctl(j) for j in range(d)]
    tree = []
    anc_next = 0
    while len(nodes) > 2:
        a, b = nodes.pop(0), nodes.pop(0)
        tree.append(G("Toffoli3", a, b, circ.anc(anc_next), tag="REFL", query=query, pair=_next_pair()))
        nodes.append(circ.anc(anc_next))
        anc_next += 1
    if len(nodes) == 2:
        final = G("Toffoli3", nodes[0], nodes[1], phs, tag="REFL", query=query, pair=_next_pair())
    else:
        final = G("CNOT", nodes[0], phs, tag="REFL", query=query)
    if up:
        return wraps + tree + [final]
    down = [replace(g, pair=_next_pair()) for g in reversed(tree)]
    return [replace(final, pair=_next_pair())] + down + wraps


# Echo helpers -----------------------------------------------------------


def _echo_prep_mask(echo: str | None):
    if not echo:
        return 0, 0, ""
    mask = 0
    xor = 0
    for j, letter in enumerate(echo):
        if letter in ("X", "Z"):
            mask |= 1 << j
        if letter in ("X", "Y"):
            xor |= 1 << j
    return mask, xor, echo


def _echo_select_masks(echo: str | None):
    if not echo:
        return 0, ""
    xor = 0
    for j, letter in enumerate(echo):
        if letter in ("X", "Y"):
            xor |= 1 << j
    return xor, echo


def _pauli_wrap_gates(echo: str, circ: Circuit, tag: str, query: int) -> list:
    out = []
    for j, letter in enumerate(echo):
        if letter != "I":
            out.append(G(letter, circ.ctl(j), tag=tag, query=query))
    return out


def _echo_applies_prep(q: int, m: int, symmetrize: bool, adjoint: bool) -> bool:
    if not symmetrize:
        return not adjoint  # every PREP, never UNPREP
    first_half = q <= m // 2
    return (not adjoint) if first_half else adjoint


def _echo_applies_select(q: int, m: int, symmetrize: bool) -> bool:
    first_of_pair = q % 2 == 1
    if not symmetrize:
        return first_of_pair
    first_half = q <= m // 2
    return first_of_pair if first_half else (not first_of_pair)


def apply_echo_and_symmetrize(circuit: Circuit, opts: BuildOptions) -> Circuit:
    """Re-assemble the circuit with echo/symmetrization options applied.

    The substitutions rewrite fragment interiors (sign-flipped rotations,
    index-permuted selects), so this rebuilds from the stored inputs rather
    than patching the flat gate list.
    """
    lcu = circuit.meta.get("lcu")
    phases = circuit.meta.get("phases")
    if lcu is None or phases is None:
        raise ValueError("circuit lacks assembly metadata; rebuild with assemble_qsp")
    opts.validate(lcu.d)
    return assemble_qsp(lcu, phases, opts)


# ---------------------------------------------------------------------------
# Relative-phase Toffoli pseudo-decomposition.


def _rccx(c1: int, c2: int, t: int, tag: str, query: int, dagger: bool) -> list:
    seq = [
        G("H", t, tag=tag, query=query),
        G("T", t, tag=tag, query=query),
        G("CNOT", c2, t, tag=tag, query=query),
        G("Tdg", t, tag=tag, query=query),
        G("CNOT", c1, t, tag=tag, query=query),
        G("T", t, tag=tag, query=query),
        G("CNOT", c2, t, tag=tag, query=query),
        G("Tdg", t, tag=tag, query=query),
        G("H", t, tag=tag, query=query),
    ]
    return circuit_adjoint(seq) if dagger else seq


def _rcccx(c1: int, c2: int, c3: int, t: int, tag: str, query: int, dagger: bool) -> list:
    ts = lambda kind: G(kind, t, tag=tag, query=query)
    cx = lambda c: G("CNOT", c, t, tag=tag, query=query)
    seq = [
        ts("H"), ts("T"), cx(c3), ts("Tdg"), ts("H"),
        cx(c1), ts("T"), cx(c2), ts("Tdg"), cx(c1), ts("T"), cx(c2), ts("Tdg"),
        ts("H"), ts("T"), cx(c3), ts("Tdg"), ts("H"),
    ]
    return circuit_adjoint(seq) if dagger else seq


def decompose_toffoli(circuit: Circuit, require_all: bool = False) -> Circuit:
    """Substitute pair-tokened Toffolis with relative-phase decompositions.

    The first member of each pair becomes the 4-T-type/2-H/3-CNOT circuit and
    its uncompute partner the adjoint, so the input-dependent phases cancel.
    Untokened (phase-unsafe) Toffolis are left intact unless require_all is
    set, in which case the unsafe context raises.
    """
    seen: dict = {}
    out: list = []
    unsafe = 0
    for g in circuit.gates:
        if g.kind == "Toffoli3":
            if g.pair is None:
                unsafe += 1
                if require_all:
                    raise PhaseUnsafeContextError(
                        f"Toffoli on {g.qubits} has no compute/uncompute partner"
                    )
                out.append(g)
                continue
            dagger = seen.pop(g.pair, False)
            if not dagger:
                seen[g.pair] = True
            c1, c2, t = g.qubits
            out.extend(_rccx(c1, c2, t, g.tag, g.query, dagger=dagger))
        elif g.kind == "ToffoliN" and len(g.qubits) == 4:
            if g.pair is None:
                unsafe += 1
                if require_all:
                    raise PhaseUnsafeContextError(
                        f"ToffoliN on {g.qubits} has no compute/uncompute partner"
                    )
                out.append(g)
                continue
            dagger = seen.pop(g.pair, False)
            if not dagger:
                seen[g.pair] = True
            c1, c2, c3, t = g.qubits
            out.extend(_rcccx(c1, c2, c3, t, g.tag, g.query, dagger=dagger))
        else:
            out.append(g)
    new = Circuit(n=circuit.n, d=circuit.d, gates=out, meta=dict(circuit.meta))
    new.meta["unsafe_toffolis"] = unsafe
    return new


# ---------------------------------------------------------------------------
# Peephole optimizer.

_DIAG_ROLE = {"Z", "S", "Sdg", "T", "Tdg", "Rz", "ProjectZero"}
_X_ROLE = {"X", "Rx"}
_Y_ROLE = {"Y", "Ry"}

_CLIFF_MERGE_BASIS = ("X", "Y", "Z", "H", "S", "Sdg")


def _role(g: Gate, q: int) -> str:
    k = g.kind
    if k in _DIAG_ROLE:
        return "d"
    if k in _X_ROLE:
        return "x"
    if k in _Y_ROLE:
        return "y"
    if k == "CZ":
        return "d"
    if k in ("CNOT", "Toffoli3", "ToffoliN"):
        return "d" if q != g.qubits[-1] else "x"
    return "o"  # H, SWAP: no commutation through


def _commutes(a: Gate, b: Gate) -> bool:
    shared = set(a.qubits) & set(b.qubits)
    if not shared:
        return True
    for q in shared:
        ra, rb = _role(a, q), _role(b, q)
        if ra != rb or ra == "o":
            return False
    return True


def _build_cliff_table():
    # product b_second @ a_first -> replacement kind (mod global phase)
    mats = {k: gate_matrix(k) for k in _CLIFF_MERGE_BASIS}
    mats["I"] = np.eye(2, dtype=complex)
    table = {}
    for a, ma in mats.items():
        for b, mb in mats.items():
            if a == "I" or b == "I":
                continue
            prod = mb @ ma
            for name, ref in mats.items():
                # phase-aligned equality
                idx = np.argmax(np.abs(ref))
                ij = np.unravel_index(idx, ref.shape)
                if abs(prod[ij]) < 1e-12:
                    continue
                ph = prod[ij] / ref[ij]
                if abs(abs(ph) - 1) < 1e-12 and np.allclose(prod, ph * ref, atol=1e-12):
                    table[(a, b)] = None if name == "I" else name
                    break
    return table


_CLIFF_TABLE = _build_cliff_table()

_INVERSE_PAIRS = {("S", "Sdg"), ("Sdg", "S"), ("T", "Tdg"), ("Tdg", "T")}
_SELF_MERGE = {("S", "S"): "Z", ("Sdg", "Sdg"): "Z", ("T", "T"): "S", ("Tdg", "Tdg"): "Sdg"}
_H_FOLD = {"Rz": "Rx", "Rx": "Rz", "Ry": None}  # H R H; Ry folds to Ry(-a)


def _same_op(a: Gate, b: Gate) -> bool:
    if a.kind != b.kind:
        return False
    if a.kind in ("CZ", "SWAP"):
        return set(a.qubits) == set(b.qubits)
    if a.kind in ("Toffoli3", "ToffoliN"):
        return set(a.qubits[:-1]) == set(b.qubits[:-1]) and a.qubits[-1] == b.qubits[-1]
    return a.qubits == b.qubits


def _try_absorb(prev: Gate, g: Gate):
    """Combine prev then g into zero or one gate, or return 'no'."""
    from .gates import SELF_INVERSE_KINDS

    if _same_op(prev, g):
        if g.kind in SELF_INVERSE_KINDS:
            return []
        if (prev.kind, g.kind) in _SELF_MERGE:
            return [replace(prev, kind=_SELF_MERGE[(prev.kind, g.kind)])]
        if g.kind in ROTATION_KINDS:
            angle = prev.angle + g.angle
            wrapped = (angle + math.pi) % (2 * math.pi) - math.pi
            if abs(wrapped) < 1e-12:
                return []  # identity up to global phase
            return [replace(prev, angle=angle)]
    if prev.kind == g.kind and g.kind == "ProjectZero" and prev.qubits == g.qubits:
        return [prev]
    if len(g.qubits) == 1 and g.qubits == prev.qubits:
        if (prev.kind, g.kind) in _INVERSE_PAIRS:
            return []
        key = (prev.kind, g.kind)
        if prev.kind in _CLIFF_MERGE_BASIS and g.kind in _CLIFF_MERGE_BASIS and key in _CLIFF_TABLE:
            result = _CLIFF_TABLE[key]
            return [] if result is None else [replace(prev, kind=result)]
    return "no"


def _peephole_pass(gates: list) -> list:
    out: list = []
    for g in gates:
        placed = False
        j = len(out) - 1
        while j >= 0:
            prev = out[j]
            absorbed = _try_absorb(prev, g)
            if absorbed != "no":
                out[j : j + 1] = absorbed
                placed = True
                break
            # H R H fold (strict adjacency on the walk): prev == H, before it a
            # rotation, before that H, all same qubit.
            if (
                g.kind == "H"
                and prev.kind in ROTATION_KINDS
                and prev.qubits == g.qubits
                and j >= 1
                and out[j - 1].kind == "H"
                and out[j - 1].qubits == g.qubits
            ):
                axis = _H_FOLD[prev.kind]
                if axis is None:
                    rep = replace(prev, angle=-prev.angle)
                else:
                    rep = replace(prev, kind=axis)
                out[j - 1 : j + 1] = [rep]
                placed = True
                break
            if not _commutes(prev, g):
                break
            j -= 1
        if not placed:
            out.append(g)
    return out


def peephole_optimize(circuit: Circuit, max_passes: int = 60) -> Circuit:
    """Backward-commutation annihilate/merge passes to a fixpoint."""
    gates = list(circuit.gates)
    for _ in range(max_passes):
        new = _peephole_pass(gates)
        if new == gates:
            break
        gates = new
    new_c = Circuit(n=circuit.n, d=circuit.d, gates=gates, meta=dict(circuit.meta))
    return new_c


# ---------------------------------------------------------------------------
# Resource accounting.


@dataclass
class ResourceCounts:
    by_kind: dict
    total: int
    rotations: int
    t_type: int
    cnot: int
    cz: int
    toffoli: int
    singles: int
    per_query: dict
    regression_estimate: float

    def summary(self) -> str:
        pq = self.per_query
        return (
            f"total={self.total} rot={self.rotations} toffoli={self.toffoli} "
            f"cnot={self.cnot} cz={self.cz} t={self.t_type} singles={self.singles}"
            + (f" per-query total={pq['total']:.1f}" if pq else "")
        )


def count_resources(circuit: Circuit) -> ResourceCounts:
    by_kind = circuit.counts()
    rot = sum(by_kind.get(k, 0) for k in ("Rx", "Ry", "Rz"))
    t_type = by_kind.get("T", 0) + by_kind.get("Tdg", 0)
    cnot = by_kind.get("CNOT", 0)
    cz = by_kind.get("CZ", 0)
    toff = by_kind.get("Toffoli3", 0) + by_kind.get("ToffoliN", 0)
    proj = by_kind.get("ProjectZero", 0)
    total = sum(by_kind.values()) - proj
    singles = total - rot - t_type - cnot - cz - toff - by_kind.get("SWAP", 0)
    m = circuit.meta.get("m")
    per_query = {}
    if m:
        per_query = {
            "total": total / m,
            "rotations": rot / m,
            "toffoli": toff / m,
            "cnot": (cnot + cz) / m,
        }
    n, d = circuit.n, circuit.d
    regression = 24.0 * n + 2.3 * d + 2.9 * (2**d)
    return ResourceCounts(
        by_kind=by_kind,
        total=total,
        rotations=rot,
        t_type=t_type,
        cnot=cnot,
        cz=cz,
        toffoli=toff,
        singles=singles,
        per_query=per_query,
        regression_estimate=regression,
    )


def expected_fragment_counts(lcu: HamiltonianLCU) -> dict:
    """Construction-exact fragment tallies (see tests for the closed forms).

    The PREP and reflection counts coincide with the standard formulas
    (2^d - 1 rotations / 2^d - 2 CNOTs; d - 1 Toffolis per reflection half).
    This SELECT staircase costs 3 * 2^(d-1) - 1 Toffolis per closed sweep,
    three above the idealized 3 * 2^(d-1) - 4 tally, which elides the
    re-anchoring of the AND chain at the sweep boundaries; the structural
    CNOT count 3 * 2^(d-1) - 2 (plus one per Pauli letter) is exact.
    """
    d = lcu.d
    omega = lcu.pauli_letter_count()
    sel_toffoli = 2 * d + _select_step_toffolis(d)
    return {
        "prep_rotations": 2**d - 1,
        "prep_cnots": 2**d - 2,
        "select_toffoli": sel_toffoli,
        "select_toffoli_paper": 3 * 2 ** (d - 1) - 4 if d >= 1 else 0,
        "select_cnot_structural": 3 * 2 ** (d - 1) - 2 if d >= 1 else 0,
        "select_cnot": (3 * 2 ** (d - 1) - 2 if d >= 1 else 0) + omega,
        "reflection_half_toffoli": max(d - 1, 0),
        "omega": omega,
    }


def _select_step_toffolis(d: int) -> int:
    if d < 1:
        return 0
    total = 0
    for k in range(2**d - 1):
        t = _trailing_ones(k) + 1
        if t >= 2:
            total += 2 * t - 3
    return total
