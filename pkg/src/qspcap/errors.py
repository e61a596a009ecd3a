"""Error channels, per-gate error placements, and importance-sample combining.

Stochastic channels are described by their Kraus decompositions; p_eps is the
total probability of NOT drawing the first Kraus operator.  A sampled plan
fixes, before simulation, which operator lands in each slot (one slot per
operand of every in-scope gate).  The operator actually applied is
E_i / sqrt(q_i), where q_i is its selection probability, which makes the
trajectory ensemble an unbiased importance unraveling of the channel; for
the unitary-Kraus channels (flips, depolarization) this reduces to plain
Pauli insertion.

The coherent amplitude channel attaches the gate-dependent unitary
G^eps = exp(eps log G) (principal branch, eigenphases in (-pi, pi]) after
every in-scope gate, deterministically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .gates import Circuit, Gate, gate_matrix
from .hamiltonian import rng_stream

__all__ = [
    "ErrorChannel",
    "ErrorPlan",
    "ScopeFilter",
    "kraus_operators",
    "count_slots",
    "iter_slots",
    "sample_plan",
    "coherent_plan",
    "combine_importance",
    "InsufficientCoverage",
    "fractional_power",
    "channel_from_json",
    "channel_to_json",
]

STOCHASTIC_KINDS = (
    "amplitude-damping",
    "phase-damping",
    "bit-flip",
    "phase-flip",
    "depolarization",
)
COHERENT_KIND = "coherent-amplitude"


class InsufficientCoverage(ValueError):
    """Binomial tail above tolerance for the provided per-count results."""


@dataclass(frozen=True)
class ScopeFilter:
    """Restriction of a channel to subcircuits, gate kinds, or qubits."""

    tags: tuple | None = None
    kinds: tuple | None = None
    qubits: tuple | None = None

    def admits(self, g: Gate) -> bool:
        if g.kind == "ProjectZero":
            return False  # measurements are error-free by default
        if self.tags is not None and g.tag not in self.tags:
            return False
        if self.kinds is not None and g.kind not in self.kinds:
            return False
        if self.qubits is not None and not (set(g.qubits) & set(self.qubits)):
            return False
        return True


@dataclass(frozen=True)
class ErrorChannel:
    kind: str
    strength: float  # p_eps
    scope: ScopeFilter | None = None

    def __post_init__(self):
        if self.kind not in STOCHASTIC_KINDS and self.kind != COHERENT_KIND:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not (0.0 <= self.strength <= 1.0):
            raise ValueError("strength (p_eps) must lie in [0, 1]")

    @property
    def stochastic(self) -> bool:
        return self.kind in STOCHASTIC_KINDS

    @property
    def epsilon(self) -> float:
        """Coherent amplitude in terms of p_eps: eps = asin(sqrt(p_eps))."""
        return math.asin(math.sqrt(self.strength))

    def admits(self, g: Gate) -> bool:
        if g.kind == "ProjectZero":
            return False
        return self.scope.admits(g) if self.scope is not None else True


_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_P0 = np.diag([1, 0]).astype(complex)
_P1 = np.diag([0, 1]).astype(complex)
_LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|


def kraus_operators(kind: str, p: float) -> list:
    """Kraus decomposition per channel; first entry is E_0."""
    sp = math.sqrt(p)
    sq = math.sqrt(1.0 - p)
    if kind == "amplitude-damping":
        return [_P0 + sq * _P1, sp * _LOWER]
    if kind == "phase-damping":
        return [sq * _I2, sp * _P0, sp * _P1]
    if kind == "bit-flip":
        return [sq * _I2, sp * _X]
    if kind == "phase-flip":
        return [sq * _I2, sp * _Z]
    if kind == "depolarization":
        r = math.sqrt(p / 3.0)
        return [sq * _I2, r * _X, r * _Y, r * _Z]
    raise ValueError(f"no Kraus decomposition for {kind!r}")


def selection_weights(kind: str, p: float) -> list:
    """Per-operator selection probabilities (E_0 drawn with 1 - p_eps)."""
    if kind == "amplitude-damping":
        return [1.0 - p, p]
    if kind == "phase-damping":
        return [1.0 - p, p / 2.0, p / 2.0]
    if kind in ("bit-flip", "phase-flip"):
        return [1.0 - p, p]
    if kind == "depolarization":
        return [1.0 - p, p / 3.0, p / 3.0, p / 3.0]
    raise ValueError(kind)


def applied_operator(kind: str, p: float, op_id: int) -> np.ndarray:
    """Importance-unraveled operator E_i / sqrt(q_i) for a sampled slot."""
    ops = kraus_operators(kind, p)
    q = selection_weights(kind, p)
    return ops[op_id] / math.sqrt(q[op_id])


@dataclass
class ErrorPlan:
    """Concrete error-operator placements for one trial.

    placements: (gate_index, operand qubit or None, op_id); op_id indexes the
    channel's Kraus list for stochastic channels, and is the string "frac"
    for the coherent whole-gate fractional power.
    """

    channel: ErrorChannel
    placements: list
    n_errors: int
    r_slots: int
    trial_id: int = 0

    def by_gate(self) -> dict:
        out: dict = {}
        for gi, q, op in self.placements:
            out.setdefault(gi, []).append((q, op))
        return out


def iter_slots(circuit: Circuit, channel: ErrorChannel):
    for gi, g in enumerate(circuit.gates):
        if channel.admits(g):
            for q in g.qubits:
                yield gi, q


def count_slots(circuit: Circuit, channel: ErrorChannel) -> int:
    """R: total operand slots of in-scope gates."""
    return sum(1 for _ in iter_slots(circuit, channel))


def sample_plan(
    circuit: Circuit,
    channel: ErrorChannel,
    seed: int,
    conditioned_n: int | None = None,
    trial_id: int = 0,
) -> ErrorPlan:
    """Randomized placements for a stochastic channel.

    Unconditioned: each slot draws independently (E_0 with 1 - p_eps).
    Conditioned on exactly N faults: a uniform N-subset of slots receives
    non-identity operators drawn by renormalized weights.
    """
    if not channel.stochastic:
        raise ValueError("sample_plan requires a stochastic channel")
    rng = rng_stream(seed, "plan", trial_id)
    slots = list(iter_slots(circuit, channel))
    R = len(slots)
    weights = selection_weights(channel.kind, channel.strength)
    placements = []
    if conditioned_n is None:
        if channel.strength > 0.0:
            draws = rng.random(R)
            cumulative = np.cumsum(weights)
            for (gi, q), u in zip(slots, draws):
                op = int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
                op = min(op, len(weights) - 1)
                if op != 0:
                    placements.append((gi, q, op))
        n_err = len(placements)
    else:
        if conditioned_n > R:
            raise ValueError(f"conditioned_n={conditioned_n} exceeds slot count R={R}")
        n_err = int(conditioned_n)
        if n_err > 0:
            # Slots drawn as uniform circuit fractions (sequential-distinct),
            # so plans built from the same stream at different depths place
            # faults at correlated relative positions: common random numbers
            # across an m sweep.
            chosen: list = []
            seen = set()
            while len(chosen) < n_err:
                ci = int(rng.random() * R)
                if ci not in seen:
                    seen.add(ci)
                    chosen.append(ci)
            tail = np.array(weights[1:], dtype=float)
            tail = tail / tail.sum()
            ops = rng.choice(np.arange(1, len(weights)), size=n_err, p=tail)
            for ci, op in zip(sorted(chosen), ops.tolist()):
                gi, q = slots[ci]
                placements.append((gi, q, int(op)))
    return ErrorPlan(channel=channel, placements=placements, n_errors=n_err,
                     r_slots=R, trial_id=trial_id)


def coherent_plan(circuit: Circuit, channel: ErrorChannel) -> ErrorPlan:
    """Deterministic whole-gate fractional-power placements."""
    if channel.stochastic:
        raise ValueError("coherent_plan requires the coherent-amplitude channel")
    placements = [(gi, None, "frac")
                  for gi, g in enumerate(circuit.gates) if channel.admits(g)]
    return ErrorPlan(channel=channel, placements=placements,
                     n_errors=len(placements), r_slots=len(placements))


_frac_cache: dict = {}


def fractional_power(g: Gate, eps: float) -> np.ndarray:
    """G^eps with the principal log branch (eigenphases in (-pi, pi]).

    For rotation gates this is the same axis rotation by eps * angle; the
    result always commutes with the gate.
    """
    key = (g.kind, g.angle, len(g.qubits), round(eps, 15))
    hit = _frac_cache.get(key)
    if hit is not None:
        return hit
    if g.kind in ("Rx", "Ry", "Rz"):
        out = gate_matrix(g.kind, eps * g.angle)
    else:
        mat = gate_matrix(g.kind, g.angle, len(g.qubits))
        evals, evecs = np.linalg.eig(mat)
        # normal matrix: orthonormalize the eigenbasis for stability
        evecs, _ = np.linalg.qr(evecs)
        # realign: QR may mix degenerate subspaces; recompute eigenvalues
        evals = np.diag(evecs.conj().T @ mat @ evecs)
        phases = np.angle(evals)
        phases = np.where(phases <= -math.pi + 1e-15, math.pi, phases)
        out = evecs @ np.diag(np.exp(1j * eps * phases)) @ evecs.conj().T
    _frac_cache[key] = out
    return out


def combine_importance(values_by_n: dict, R: int, p: float, tail_tol: float = 1e-3):
    """Binomial-weighted expectation of per-fault-count means.

    values_by_n maps N -> mean over trials conditioned on exactly N faults.
    Returns (expected value, tail mass) where tail mass is the binomial
    probability not covered by the provided counts; raises if the tail
    exceeds tail_tol relative to the covered weight.
    """
    from scipy.stats import binom

    if not values_by_n:
        raise InsufficientCoverage("no per-count results supplied")
    ns = sorted(values_by_n)
    pmf = {n: float(binom.pmf(n, R, p)) for n in ns}
    covered = sum(pmf.values())
    tail = 1.0 - covered
    if tail > tail_tol * max(covered, 1e-300):
        raise InsufficientCoverage(
            f"binomial tail {tail:.3e} beyond covered counts {ns} exceeds tolerance"
        )
    expected = sum(pmf[n] * values_by_n[n] for n in ns)
    # Assign the residual tail the value of the largest covered count, which
    # bounds the truncation bias by tail * range(values).
    expected += tail * values_by_n[ns[-1]]
    return expected, tail


# --- JSON configuration (external interface) -------------------------------


def channel_from_json(obj) -> ErrorChannel:
    """Build a channel from a JSON object or string:
    {"kind": ..., "strength": ..., "scope": {"tags": [...], "kinds": [...],
    "qubits": [...]}}.
    """
    if isinstance(obj, str):
        obj = json.loads(obj)
    scope = None
    if obj.get("scope"):
        s = obj["scope"]
        scope = ScopeFilter(
            tags=tuple(s["tags"]) if s.get("tags") else None,
            kinds=tuple(s["kinds"]) if s.get("kinds") else None,
            qubits=tuple(s["qubits"]) if s.get("qubits") else None,
        )
    return ErrorChannel(kind=obj["kind"], strength=float(obj["strength"]), scope=scope)


def channel_to_json(ch: ErrorChannel) -> dict:
    out = {"kind": ch.kind, "strength": ch.strength}
    if ch.scope is not None:
        out["scope"] = {
            "tags": list(ch.scope.tags) if ch.scope.tags else None,
            "kinds": list(ch.scope.kinds) if ch.scope.kinds else None,
            "qubits": list(ch.scope.qubits) if ch.scope.qubits else None,
        }
    return out
