"""Translate small quantum circuits into twisted cluster graphs.

Gate set: |+> preparation, Hadamard, R_theta = exp(-i theta Z / 2), and
controlled-phase.  Each logical qubit becomes a chain; an appended vertex
with twist angle t acts as R_t composed after a Hadamard, so a plain
Hadamard is one untwisted vertex, a rotation appends the angle pair
(0, theta) so the two Hadamards cancel, and a controlled-phase is a
bridging edge between chain ends (padded by two untwisted vertices when
an end is a bare head or already bridged, keeping each wire's Hadamard
parity intact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import TWO_PI, TwistedGraph

# sign relating a vertex twist angle to the R_theta it implements; fixed
# once against the adiabatic-evolution oracle and pinned by golden tests
GADGET_ANGLE_SIGN = 1.0


@dataclass(frozen=True)
class CircuitIR:
    """Validated circuit: op list over ``n_qubits`` logical qubits."""

    n_qubits: int
    ops: tuple[tuple, ...]
    declared_inputs: tuple[int, ...] = ()

    def __post_init__(self):
        seen: set[int] = set(self.declared_inputs)
        for op in self.ops:
            name, *args = op
            qubits = args[:2] if name == "CZ" else args[:1]
            for q in qubits:
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"op {op} acts on undeclared qubit {q}")
            if name == "RZ" and not math.isfinite(args[1]):
                raise ValueError("rotation angle must be finite")
            if name == "PREP":
                if args[0] in seen:
                    raise ValueError(f"qubit {args[0]} prepared twice or after use")
                seen.add(args[0])
            else:
                for q in qubits:
                    if q not in seen:
                        raise ValueError(
                            f"qubit {q} used before PREP and not a declared input")


class CircuitParseError(ValueError):
    def __init__(self, line_no: int, column: int, message: str):
        super().__init__(f"line {line_no}, column {column}: {message}")
        self.line_no = line_no
        self.column = column


def parse_circuit(text: str) -> CircuitIR:
    """Parse the line format: header ``QUBITS n [INPUTS i,j,...]`` then one op per line."""
    n_qubits = None
    declared: tuple[int, ...] = ()
    ops = []

    def fail(line_no, line, token, msg):
        col = line.find(token) + 1 if token and token in line else 1
        raise CircuitParseError(line_no, col, msg)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0].upper()
        if n_qubits is None:
            if head != "QUBITS":
                fail(line_no, raw, tokens[0], "expected QUBITS header")
            if len(tokens) not in (2, 4) or (len(tokens) == 4 and tokens[2].upper() != "INPUTS"):
                fail(line_no, raw, tokens[0], "header is QUBITS n [INPUTS i,j,...]")
            try:
                n_qubits = int(tokens[1])
            except ValueError:
                fail(line_no, raw, tokens[1], "qubit count must be an integer")
            if len(tokens) == 4:
                try:
                    declared = tuple(int(t) for t in tokens[3].split(","))
                except ValueError:
                    fail(line_no, raw, tokens[3], "INPUTS must be a comma list of ints")
            continue
        if head in ("PREP", "H"):
            if len(tokens) != 2:
                fail(line_no, raw, tokens[0], f"{head} takes one qubit")
            try:
                ops.append((head, int(tokens[1])))
            except ValueError:
                fail(line_no, raw, tokens[1], "qubit index must be an integer")
        elif head == "RZ":
            if len(tokens) != 3:
                fail(line_no, raw, tokens[0], "RZ takes qubit and angle")
            try:
                q = int(tokens[1])
            except ValueError:
                fail(line_no, raw, tokens[1], "qubit index must be an integer")
            try:
                theta = float(tokens[2])
            except ValueError:
                fail(line_no, raw, tokens[2], "angle must be a number")
            if not math.isfinite(theta):
                fail(line_no, raw, tokens[2], "angle must be finite")
            ops.append(("RZ", q, theta))
        elif head == "CZ":
            if len(tokens) != 3:
                fail(line_no, raw, tokens[0], "CZ takes two qubits")
            try:
                q1, q2 = int(tokens[1]), int(tokens[2])
            except ValueError:
                fail(line_no, raw, tokens[1], "qubit indices must be integers")
            if q1 == q2:
                fail(line_no, raw, tokens[1], "CZ needs two distinct qubits")
            ops.append(("CZ", q1, q2))
        else:
            fail(line_no, raw, tokens[0], f"unknown mnemonic {tokens[0]!r}")
    if n_qubits is None:
        raise CircuitParseError(1, 1, "missing QUBITS header")
    try:
        return CircuitIR(n_qubits, tuple(ops), declared)
    except ValueError as exc:
        raise CircuitParseError(0, 0, str(exc)) from exc


class _WireState:
    __slots__ = ("end", "is_head", "bridged")

    def __init__(self, end):
        self.end = end
        self.is_head = True
        self.bridged = False


def compile_circuit(circuit: CircuitIR) -> TwistedGraph:
    """Build the twisted graph whose adiabatic sweep enacts the circuit."""
    angles: list[float] = []
    edges: set[frozenset[int]] = set()
    dropped: set[int] = set()
    inputs: list[int] = []
    wires: dict[int, _WireState] = {}

    def new_vertex(theta: float) -> int:
        angles.append(theta % TWO_PI)
        return len(angles)

    def start_wire(q: int):
        v = new_vertex(0.0)
        dropped.add(v)
        inputs.append(v)
        wires[q] = _WireState(v)

    def extend(q: int, theta: float):
        w = wires[q]
        v = new_vertex(theta)
        edges.add(frozenset((w.end, v)))
        w.end = v
        w.is_head = False
        w.bridged = False

    for q in circuit.declared_inputs:
        start_wire(q)
    for op in circuit.ops:
        name = op[0]
        if name == "PREP":
            start_wire(op[1])
            continue
        if any(op[i] not in wires for i in range(1, 3 if name == "CZ" else 2)):
            raise ValueError(f"op {op} acts on a qubit with no wire yet")
        if name == "H":
            extend(op[1], 0.0)
        elif name == "RZ":
            # each appended vertex acts as (rotation-by-its-angle o H), so the
            # untwisted spacer goes first: R_t H . R_0 H = R_t
            extend(op[1], 0.0)
            extend(op[1], GADGET_ANGLE_SIGN * op[2])
        elif name == "CZ":
            for q in (op[1], op[2]):
                if wires[q].is_head or wires[q].bridged:
                    extend(q, 0.0)
                    extend(q, 0.0)
            a, b = wires[op[1]].end, wires[op[2]].end
            edges.add(frozenset((a, b)))
            wires[op[1]].bridged = wires[op[2]].bridged = True
    outputs = [wires[q].end for q in sorted(wires)]
    return TwistedGraph(
        vertices=tuple((i + 1, a) for i, a in enumerate(angles)),
        edges=frozenset(edges),
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        dropped_terms=frozenset(dropped),
    )


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def _embed(gate: np.ndarray, q: int, n: int) -> np.ndarray:
    mats = [np.eye(2, dtype=complex)] * n
    mats[q] = gate
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _cz_dense(q1: int, q2: int, n: int) -> np.ndarray:
    dim = 1 << n
    idx = np.arange(dim)
    b1 = (idx >> (n - 1 - q1)) & 1
    b2 = (idx >> (n - 1 - q2)) & 1
    return np.diag(np.where((b1 & b2) == 1, -1.0, 1.0).astype(complex))


def compiled_unitary_reference(circuit: CircuitIR) -> np.ndarray:
    """Dense product of gate matrices in circuit order (qubit 0 most significant)."""
    if circuit.n_qubits > 10:
        raise ValueError("reference unitary limited to 10 qubits")
    n = circuit.n_qubits
    u = np.eye(1 << n, dtype=complex)
    for op in circuit.ops:
        if op[0] == "PREP":
            continue  # dimension is fixed; preparation is the identity here
        if op[0] == "H":
            g = _embed(_H, op[1], n)
        elif op[0] == "RZ":
            g = _embed(_rz(op[2]), op[1], n)
        elif op[0] == "CZ":
            g = _cz_dense(op[1], op[2], n)
        else:
            raise ValueError(f"unknown op {op}")
        u = g @ u
    return u
