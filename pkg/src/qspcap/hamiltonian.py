"""Randomized Heisenberg spin chains and their Pauli-sum (LCU) form.

The signal operator is a periodic-boundary spin chain

    L = sum_k { a_k X_k X_{k+1} + b_k Y_k Y_{k+1} + c_k Z_k Z_{k+1} }
      + sum_k h_k Z_k

with a, b, c ~ U(0, 2) and h ~ U(-1, 1).  Its LCU form carries the
block-encoding scale ||L|| = sum |alpha_k| (the 1-norm, which the PREP
amplitudes force, not the spectral norm) and the control width
d = ceil(log2 L) after zero-padding the coefficient vector to a power of
two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "PauliString",
    "SpinChainSpec",
    "HamiltonianLCU",
    "random_spin_chain",
    "pauli_decompose",
    "lcu_from_terms",
    "ideal_final_state",
    "rng_stream",
    "random_product_state",
    "save_hamiltonian",
    "load_hamiltonian",
]

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def rng_stream(seed: int, *path) -> np.random.Generator:
    """Independent, splittable RNG stream for (seed, purpose-path).

    Counter-based construction: the path tokens become spawn keys of a
    SeedSequence, so Hamiltonian draws, state draws, and error placements
    never share a stream.
    """
    tokens = [abs(hash(p)) % (2**31) if isinstance(p, str) else int(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(tokens)))


@dataclass(frozen=True)
class PauliString:
    """n-qubit Pauli operator as a letter string; letters[q] acts on qubit q."""

    letters: str

    def __post_init__(self):
        if any(ch not in "IXYZ" for ch in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")

    @property
    def n(self) -> int:
        return len(self.letters)

    def weight(self) -> int:
        return sum(1 for ch in self.letters if ch != "I")

    def support(self) -> list[int]:
        return [q for q, ch in enumerate(self.letters) if ch != "I"]

    def dense(self) -> np.ndarray:
        # Qubit 0 is the least significant bit of the state index.
        out = np.array([[1.0 + 0j]])
        for ch in self.letters:
            out = np.kron(_PAULI_MATS[ch], out)
        return out

    def sparse(self) -> sp.csr_matrix:
        out = sp.identity(1, dtype=complex, format="csr")
        for ch in self.letters:
            out = sp.kron(sp.csr_matrix(_PAULI_MATS[ch]), out, format="csr")
        return out

    def __str__(self) -> str:
        return self.letters


@dataclass(frozen=True)
class SpinChainSpec:
    """Coupling and field coefficients of one randomized spin chain."""

    n: int
    a: tuple
    b: tuple
    c: tuple
    h: tuple
    seed: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("spin chains need n >= 3")
        for vec in (self.a, self.b, self.c, self.h):
            if len(vec) != self.n:
                raise ValueError("coefficient vectors must have length n")


@dataclass
class HamiltonianLCU:
    """Weighted Pauli-sum form sum_k alpha_k P_k, zero-padded to 2^d terms."""

    n: int
    terms: list  # list[(float alpha, PauliString)], padded length 2^d
    scale: float  # sum |alpha_k| (block-encoding normalization)

    @property
    def L(self) -> int:
        """Term count before padding (trailing zero-coefficient identities)."""
        count = len(self.terms)
        while count > 1 and self.terms[count - 1][0] == 0.0:
            count -= 1
        return count

    @property
    def d(self) -> int:
        return max(int(math.ceil(math.log2(max(len(self.terms), 1)))), 0)

    def alphas(self) -> np.ndarray:
        return np.array([a for a, _ in self.terms])

    def dense(self) -> np.ndarray:
        dim = 2**self.n
        out = np.zeros((dim, dim), dtype=complex)
        for alpha, p in self.terms:
            if alpha != 0.0:
                out += alpha * p.dense()
        return out

    def sparse(self) -> sp.csr_matrix:
        dim = 2**self.n
        out = sp.csr_matrix((dim, dim), dtype=complex)
        for alpha, p in self.terms:
            if alpha != 0.0:
                out = out + alpha * p.sparse()
        return out

    def pauli_letter_count(self) -> int:
        """Total single-qubit Pauli letters (omega): 7n for spin chains."""
        return sum(p.weight() for a, p in self.terms if a != 0.0)


def random_spin_chain(n: int, seed: int) -> SpinChainSpec:
    """Draw couplings a,b,c ~ U(0,2) and fields h ~ U(-1,1), reproducibly."""
    if n < 3:
        raise ValueError("spin chains need n >= 3")
    rng = rng_stream(seed, "spin-chain", n)
    a = tuple(rng.uniform(0.0, 2.0, size=n).tolist())
    b = tuple(rng.uniform(0.0, 2.0, size=n).tolist())
    c = tuple(rng.uniform(0.0, 2.0, size=n).tolist())
    h = tuple(rng.uniform(-1.0, 1.0, size=n).tolist())
    return SpinChainSpec(n=n, a=a, b=b, c=c, h=h, seed=seed)


def _two_site(n: int, letter: str, k: int) -> PauliString:
    letters = ["I"] * n
    letters[k] = letter
    letters[(k + 1) % n] = letter
    return PauliString("".join(letters))


def _one_site(n: int, letter: str, k: int) -> PauliString:
    letters = ["I"] * n
    letters[k] = letter
    return PauliString("".join(letters))


def pauli_decompose(spec: SpinChainSpec) -> HamiltonianLCU:
    """3n two-site XX/YY/ZZ bond terms plus n single-site Z terms (L = 4n),
    zero-padded with identity terms to 2^d entries.
    """
    n = spec.n
    terms: list = []
    for letter, coeffs in (("X", spec.a), ("Y", spec.b), ("Z", spec.c)):
        for k in range(n):
            terms.append((float(coeffs[k]), _two_site(n, letter, k)))
    for k in range(n):
        terms.append((float(spec.h[k]), _one_site(n, "Z", k)))
    scale = float(sum(abs(a) for a, _ in terms))
    d = int(math.ceil(math.log2(len(terms))))
    identity = PauliString("I" * n)
    while len(terms) < 2**d:
        terms.append((0.0, identity))
    return HamiltonianLCU(n=n, terms=terms, scale=scale)


def lcu_from_terms(n: int, terms: list) -> HamiltonianLCU:
    """LCU from an explicit (alpha, PauliString) list, zero-padded."""
    terms = [(float(a), p) for a, p in terms]
    scale = float(sum(abs(a) for a, _ in terms))
    d = max(int(math.ceil(math.log2(max(len(terms), 1)))), 0)
    identity = PauliString("I" * n)
    padded = list(terms)
    while len(padded) < 2**d:
        padded.append((0.0, identity))
    return HamiltonianLCU(n=n, terms=padded, scale=scale)


def ideal_final_state(h: HamiltonianLCU, tau: float, psi0: np.ndarray) -> np.ndarray:
    """exp(-i * tau * (L/scale)) psi0, i.e. evolution by exp(-i L t) with
    tau = scale * t, by sparse matrix exponentiation.
    """
    if h.n > 14:
        raise ValueError("dense/sparse exponentiation capped at n = 14")
    if psi0.shape != (2**h.n,):
        raise ValueError(f"state dimension mismatch: {psi0.shape} vs n={h.n}")
    mat = h.sparse() * (-1j * float(tau) / h.scale)
    return spla.expm_multiply(mat, psi0.astype(complex))


def random_product_state(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random product state: independent random Bloch vector per qubit."""
    state = np.array([1.0 + 0j])
    for _ in range(n):
        # Haar on a single qubit: cos(t/2)|0> + e^{i phi} sin(t/2)|1>,
        # cos(t) uniform on [-1, 1].
        u = rng.uniform(-1.0, 1.0)
        phi = rng.uniform(0.0, 2.0 * np.pi)
        t = math.acos(u)
        q = np.array([math.cos(t / 2), np.exp(1j * phi) * math.sin(t / 2)])
        state = np.kron(q, state)  # new qubit becomes the next-higher bit
    return state


def save_hamiltonian(h: HamiltonianLCU, path: str) -> None:
    """Text form: one 'coefficient letters' line per term, '#' comments."""
    with open(path, "w") as fh:
        fh.write(f"# qspcap hamiltonian: n={h.n} terms={h.L} scale={h.scale!r}\n")
        for alpha, p in h.terms[: h.L]:
            fh.write(f"{alpha!r} {p.letters}\n")


def load_hamiltonian(path: str) -> HamiltonianLCU:
    terms = []
    n = None
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            coeff, letters = line.split()
            p = PauliString(letters)
            if n is None:
                n = p.n
            elif p.n != n:
                raise ValueError("inconsistent qubit counts in hamiltonian file")
            terms.append((float(coeff), p))
    if not terms:
        raise ValueError(f"no terms found in {path}")
    return lcu_from_terms(n, terms)
