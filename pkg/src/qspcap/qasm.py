"""QASM 2.0-style dialect for assembled circuits.

Scope tags, query indices, and compute/uncompute pair tokens ride along as
comment pragmas so a re-imported circuit reproduces the exact gate list.
Projection operators (deterministic post-selection) are emitted with the
dialect instruction `projz`.
"""

from __future__ import annotations

import re

from .gates import GATE_ARITY, ROTATION_KINDS, Circuit, Gate

__all__ = ["export_qasm", "import_qasm", "qasm_string"]

_KIND_TO_OP = {
    "X": "x", "Y": "y", "Z": "z", "H": "h", "S": "s", "Sdg": "sdg",
    "T": "t", "Tdg": "tdg", "Rx": "rx", "Ry": "ry", "Rz": "rz",
    "CNOT": "cx", "CZ": "cz", "SWAP": "swap",
    "Toffoli3": "ccx", "ToffoliN": "cnx", "ProjectZero": "projz",
}
_OP_TO_KIND = {v: k for k, v in _KIND_TO_OP.items()}


def _qubit_name(circ: Circuit, q: int) -> str:
    reg = circ.register_of(q)
    if reg == "TGT":
        return f"tgt[{q}]"
    if reg == "CTL":
        return f"ctl[{q - circ.n}]"
    if reg == "PHS":
        return "phs[0]"
    return f"anc[{q - circ.n - circ.d - 1}]"


def qasm_string(circ: Circuit) -> str:
    lines = [
        "OPENQASM 2.0;",
        "// qspcap dialect: projz = deterministic |0><0| projector;",
        "// pragmas: #scope <tag>, #query <k>, #pair <token> carry gate provenance.",
        f"// #registers n={circ.n} d={circ.d}",
        f"qreg tgt[{max(circ.n, 1)}];",
    ]
    if circ.d > 0:
        lines.append(f"qreg ctl[{circ.d}];")
    lines.append("qreg phs[1];")
    if circ.d > 0:
        lines.append(f"qreg anc[{circ.d}];")
    meta = circ.meta
    if "m" in meta:
        lines.append(f"// #meta m={meta['m']} tau={meta.get('tau')!r} eps_baked={meta.get('eps_baked')!r}")
    scope = None
    query = None
    for g in circ.gates:
        if g.tag != scope:
            lines.append(f"// #scope {g.tag}")
            scope = g.tag
        if g.query != query:
            lines.append(f"// #query {g.query}")
            query = g.query
        op = _KIND_TO_OP[g.kind]
        args = ", ".join(_qubit_name(circ, q) for q in g.qubits)
        if g.kind in ROTATION_KINDS:
            stmt = f"{op}({g.angle!r}) {args};"
        else:
            stmt = f"{op} {args};"
        if g.pair is not None:
            stmt += f" // #pair {g.pair}"
        lines.append(stmt)
    return "\n".join(lines) + "\n"


def export_qasm(circ: Circuit, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(qasm_string(circ))


_GATE_RE = re.compile(
    r"^(?P<op>[a-z]+)\s*(?:\((?P<angle>[^)]+)\))?\s+(?P<args>[^;]+);"
    r"(?:\s*//\s*#pair\s+(?P<pair>\d+))?\s*$"
)


def import_qasm(source: str) -> Circuit:
    """Parse the dialect back into a Circuit with identical gate list."""
    n = d = None
    m_meta: dict = {}
    gates: list = []
    scope = "OTHER"
    query = 0
    reg_re = re.compile(r"#registers n=(\d+) d=(\d+)")
    meta_re = re.compile(r"#meta m=(\S+) tau=(\S+) eps_baked=(\S+)")
    circ: Circuit | None = None

    def resolve(name: str) -> int:
        reg, idx = name.strip().split("[")
        idx = int(idx.rstrip("]"))
        if reg == "tgt":
            return idx
        if reg == "ctl":
            return n + idx
        if reg == "phs":
            return n + d
        if reg == "anc":
            return n + d + 1 + idx
        raise ValueError(f"unknown register {reg}")

    for raw in source.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("//"):
            mreg = reg_re.search(line)
            if mreg:
                n, d = int(mreg.group(1)), int(mreg.group(2))
            mm = meta_re.search(line)
            if mm:
                m_meta = {"m": int(mm.group(1)), "tau": float(mm.group(2)),
                          "eps_baked": float(mm.group(3))}
            msc = re.search(r"#scope (\w+)", line)
            if msc:
                scope = msc.group(1)
            mq = re.search(r"#query (\d+)", line)
            if mq:
                query = int(mq.group(1))
            continue
        if line.startswith(("OPENQASM", "qreg", "creg", "include")):
            continue
        m = _GATE_RE.match(line)
        if not m:
            raise ValueError(f"cannot parse QASM line: {raw!r}")
        if n is None or d is None:
            raise ValueError("missing #registers pragma before first gate")
        op = m.group("op")
        kind = _OP_TO_KIND.get(op)
        if kind is None:
            raise ValueError(f"unknown op {op!r}")
        qubits = tuple(resolve(a) for a in m.group("args").split(","))
        angle = float(m.group("angle")) if m.group("angle") else None
        pair = int(m.group("pair")) if m.group("pair") else None
        gates.append(Gate(kind=kind, qubits=qubits, angle=angle, tag=scope,
                          query=query, pair=pair))
    if n is None or d is None:
        raise ValueError("missing #registers pragma")
    circ = Circuit(n=n, d=d, gates=gates, meta=m_meta)
    circ.validate()
    return circ


def import_qasm_file(path: str) -> Circuit:
    with open(path) as fh:
        return import_qasm(fh.read())
