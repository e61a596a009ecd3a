"""Circuit execution: backends, deterministic post-selection, outcomes.

run_circuit executes a circuit with an attached error plan and returns the
surviving norm (the running product of post-selection masses), the failure
probability p_f = 1 - ||psi'||^2, and the overlap q with the ideal state.
Execution is deterministic given (circuit, plan, initial state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ErrorPlan, applied_operator, fractional_power
from ..gates import Circuit, Gate
from .dense import DenseState, apply_matrix_to_array
from .hybrid import HybridState
from .tree import VectorTreeState

__all__ = ["SimOutcome", "run_circuit", "make_state", "fidelity_accumulate", "AllTrialsFailed"]

BACKENDS = ("dense", "tree", "hybrid")


class AllTrialsFailed(ArithmeticError):
    pass


@dataclass
class SimOutcome:
    surviving_norm: float  # ||psi'||^2 in [0, 1] (a statistical weight for
    # damping-type unravelings, where it can marginally exceed 1)
    p_f: float
    q: float  # overlap |<ideal|psi_normalized>|, nan if no ideal supplied
    seed: int = 0
    plan_id: int = 0
    n_errors: int = 0

    @property
    def q_sq(self) -> float:
        return self.q * self.q


class _DenseAdapter:
    def __init__(self, n_qubits: int, tgt_state: np.ndarray):
        self.state = DenseState.from_product(n_qubits, tgt_state)
        self.survival = 1.0
        self.n_qubits = n_qubits

    def apply_gate(self, g: Gate) -> None:
        if g.kind == "ProjectZero":
            mass = self.state.project_zero(g.qubits[0])
            if mass > 0:
                self.state.psi /= math.sqrt(mass)
            self.survival *= mass
            return
        self.state.apply_gate(g)

    def apply_matrix(self, mat: np.ndarray, qubits) -> None:
        self.state.apply_matrix(mat, qubits)

    def project_zero(self, qubit: int) -> float:
        mass = self.state.project_zero(qubit)
        if mass > 0:
            self.state.psi /= math.sqrt(mass)
        self.survival *= mass
        return mass

    def norm_sq(self) -> float:
        return self.state.norm_sq()

    def to_dense(self) -> np.ndarray:
        return self.state.to_dense()


class _TreeAdapter:
    def __init__(self, n_qubits: int, tgt_state: np.ndarray, leaf_qubits):
        self.state = VectorTreeState(n_qubits, leaf_qubits, tgt_state)
        self.n_qubits = n_qubits

    @property
    def survival(self) -> float:
        return self.state.survival

    def apply_gate(self, g: Gate) -> None:
        if g.kind == "ProjectZero":
            self.state.project_zero(g.qubits[0])
            return
        self.state.apply_gate(g)

    def apply_matrix(self, mat, qubits) -> None:
        self.state.apply_matrix(mat, qubits)

    def project_zero(self, qubit: int) -> float:
        return self.state.project_zero(qubit)

    def norm_sq(self) -> float:
        return self.state.norm_sq()

    def to_dense(self) -> np.ndarray:
        return self.state.to_dense()


class _HybridAdapter:
    def __init__(self, n_qubits: int, tgt_state: np.ndarray, leaf_qubits):
        self.state = HybridState(n_qubits, leaf_qubits, tgt_state)
        self.n_qubits = n_qubits

    @property
    def survival(self) -> float:
        return self.state.survival

    def apply_gate(self, g: Gate) -> None:
        self.state.apply_gate(g)

    def apply_matrix(self, mat, qubits) -> None:
        self.state.apply_matrix(mat, qubits)

    def project_zero(self, qubit: int) -> float:
        return self.state.project_zero(qubit)

    def norm_sq(self) -> float:
        return self.state.norm_sq()

    def to_dense(self) -> np.ndarray:
        return self.state.to_dense()


def make_state(circuit: Circuit, psi0: np.ndarray, backend: str = "dense"):
    """Initial register state: TGT holds psi0, CTL/PHS/ANC hold |0>; tree and
    hybrid backends use the TGT register as the leaf subset."""
    N = circuit.n_qubits
    leaf = tuple(range(circuit.n))
    if backend == "dense":
        return _DenseAdapter(N, psi0)
    if backend == "tree":
        return _TreeAdapter(N, psi0, leaf)
    if backend == "hybrid":
        return _HybridAdapter(N, psi0, leaf)
    raise ValueError(f"unknown backend {backend!r} (use one of {BACKENDS})")


def run_circuit(
    circuit: Circuit,
    plan: ErrorPlan | None,
    psi0: np.ndarray,
    backend: str = "dense",
    ideal_tgt: np.ndarray | None = None,
    seed: int = 0,
) -> SimOutcome:
    """Execute the circuit with the plan's error operators attached after
    their gates; returns surviving norm, p_f, and overlap with the ideal."""
    state = make_state(circuit, psi0, backend)
    by_gate = plan.by_gate() if plan is not None else {}
    eps = plan.channel.epsilon if (plan is not None and not plan.channel.stochastic) else 0.0
    for gi, g in enumerate(circuit.gates):
        state.apply_gate(g)
        entries = by_gate.get(gi)
        if not entries:
            continue
        for qubit, op_id in entries:
            if op_id == "frac":
                state.apply_matrix(fractional_power(g, eps), g.qubits)
            else:
                mat = applied_operator(plan.channel.kind, plan.channel.strength, op_id)
                state.apply_matrix(mat, (qubit,))
    p_k = state.survival * state.norm_sq()
    p_k = float(p_k)
    q = float("nan")
    if ideal_tgt is not None:
        q = overlap_with_ideal(state, circuit, ideal_tgt)
    return SimOutcome(
        surviving_norm=p_k,
        p_f=1.0 - p_k,
        q=q,
        seed=seed,
        plan_id=plan.trial_id if plan is not None else 0,
        n_errors=plan.n_errors if plan is not None else 0,
    )


def overlap_with_ideal(state, circuit: Circuit, ideal_tgt: np.ndarray) -> float:
    """|<ideal_tgt (x) 0_rest | psi_normalized>|."""
    nrm = state.norm_sq()
    if nrm <= 0.0:
        return 0.0
    psi = state.to_dense()
    block = psi[: len(ideal_tgt)]
    return float(abs(np.vdot(ideal_tgt, block)) / math.sqrt(nrm))


def fidelity_accumulate(outcomes, stderr: bool = True):
    """Survival-weighted infidelity 1 - sum_k p_k q_k^2 / sum_k p_k.

    Returns (delta_F, standard error) with the standard error from the
    linearized ratio estimator.
    """
    ps = np.array([o.surviving_norm for o in outcomes], dtype=float)
    qs2 = np.array([o.q * o.q for o in outcomes], dtype=float)
    wsum = ps.sum()
    if wsum <= 0.0:
        raise AllTrialsFailed("no surviving probability mass across trials")
    fbar = float((ps * qs2).sum() / wsum)
    delta = 1.0 - fbar
    if not stderr or len(ps) < 2:
        return delta, 0.0
    resid = ps * (qs2 - fbar)
    se = float(np.sqrt((resid**2).sum()) / wsum)
    return delta, se
