"""Measurement-amplifier and router gadgets, verified with a signed
stabilizer tableau plus exact adiabatic sweeps.

Paulis are held as (phase, x-mask, z-mask) with P = i^phase * prod X^x Z^z;
sign bookkeeping covers +-1 (Hermitian products), and queries whose product
would carry +-i are rejected as non-Hermitian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import ed
from .model import InterpolationSpec, PauliTerm, TwistedGraph, cluster_terms, get_envelope

Pauli = tuple[int, int, int]  # (phase mod 4, x bitmask, z bitmask)


def pauli_mul(p1: Pauli, p2: Pauli) -> Pauli:
    """Product with exact phase: moving X^x2 through Z^z1 picks up (-1)^overlap."""
    ph = (p1[0] + p2[0] + 2 * (p1[2] & p2[1]).bit_count()) % 4
    return (ph, p1[1] ^ p2[1], p1[2] ^ p2[2])


def pauli_sign(p: Pauli) -> int | None:
    """+1/-1 for a Hermitian Pauli, None when the phase is +-i."""
    rel = (p[0] - (p[1] & p[2]).bit_count()) % 4
    if rel == 0:
        return 1
    if rel == 2:
        return -1
    return None


def paulis_commute(p1: Pauli, p2: Pauli) -> bool:
    return ((p1[1] & p2[2]).bit_count() + (p1[2] & p2[1]).bit_count()) % 2 == 0


def pauli_from_factors(factors: dict[int, str], sign: int = 1) -> Pauli:
    """Hermitian Pauli from vertex->axis factors (1-based vertex ids)."""
    x = z = 0
    for v, f in factors.items():
        bit = 1 << (v - 1)
        if f == "X":
            x |= bit
        elif f == "Z":
            z |= bit
        elif f == "Y":
            x |= bit
            z |= bit
        else:
            raise ValueError("tableau Paulis must have X/Y/Z factors")
    ph = ((x & z).bit_count() + (0 if sign > 0 else 2)) % 4
    return (ph, x, z)


def pauli_from_term(term: PauliTerm) -> Pauli:
    if abs(abs(term.coefficient) - 1.0) > 1e-12:
        raise ValueError("expected a unit-weight Pauli term")
    return pauli_from_factors(dict(term.factors), 1 if term.coefficient > 0 else -1)


def pauli_to_dense(p: Pauli, n: int) -> np.ndarray:
    """Dense matrix, for brute-force cross checks at small n."""
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Z = np.array([[1, 0], [0, -1]], dtype=complex)
    I = np.eye(2, dtype=complex)
    out = np.array([[1.0 + 0j]])
    for bit in range(n):  # vertex v = bit+1; kron order: last vertex most significant
        m = I
        if (p[1] >> bit) & 1:
            m = X if not (p[2] >> bit) & 1 else Z @ X  # X then Z applied left
        elif (p[2] >> bit) & 1:
            m = Z
        out = np.kron(m, out)
    return (1j ** p[0]) * out


@dataclass
class StabilizerTableau:
    """Independent commuting signed generators with optional logical pairs."""

    n_qubits: int
    generators: list[Pauli]
    logical_x: list[Pauli] = field(default_factory=list)
    logical_z: list[Pauli] = field(default_factory=list)

    def __post_init__(self):
        for p in self.generators + self.logical_x + self.logical_z:
            if pauli_sign(p) is None:
                raise ValueError("tableau entries must be Hermitian (+-1 phase)")
        for i, a in enumerate(self.generators):
            for b in self.generators[i + 1:]:
                if not paulis_commute(a, b):
                    raise ValueError("generators must commute")
        if self._rank(self.generators) != len(self.generators):
            raise ValueError("generators must be independent")
        for log in self.logical_x + self.logical_z:
            for g in self.generators:
                if not paulis_commute(log, g):
                    raise ValueError("logicals must commute with all generators")
        for j, xb in enumerate(self.logical_x):
            for k, zb in enumerate(self.logical_z):
                want = (j == k)
                if paulis_commute(xb, zb) == want:
                    raise ValueError("logical pairs must anticommute exactly pairwise")

    def _rank(self, paulis: Sequence[Pauli]) -> int:
        return _gf2_rank((p[1] << self.n_qubits) | p[2] for p in paulis)

    def contains(self, query: Pauli) -> tuple[bool, int | None]:
        """Whether +-query is a generator product.

        Returns (member, sign) with sign the one the group realizes on the
        unsigned Pauli string, so callers compare it with their query's sign.
        """
        if pauli_sign(query) is None:
            raise ValueError("query must be Hermitian")
        n = self.n_qubits
        rows = [(p[1] << n) | p[2] for p in self.generators]
        combo = _gf2_solve(rows, (query[1] << n) | query[2])
        if combo is None:
            return False, None
        prod = (0, 0, 0)
        for i, p in enumerate(self.generators):
            if (combo >> i) & 1:
                prod = pauli_mul(prod, p)
        psign = pauli_sign(prod)
        if psign is None:
            return False, None  # +-i product: rejected as non-Hermitian
        return True, psign


def graph_stabilizers(graph: TwistedGraph) -> list[Pauli]:
    """+1-signed vertex stabilizers X_v prod Z_neigh of non-dropped vertices."""
    return [pauli_from_factors({**{w: "Z" for w in graph.neighbors(v)}, v: "X"})
            for v, theta in graph.vertices
            if v not in graph.dropped_terms and theta == 0.0]


def reduce_modulo(generators: Sequence[Pauli], query: Pauli,
                  free_x_mask: int) -> tuple[bool, int | None, Pauli | None]:
    """Membership of ``query`` up to X factors on ``free_x_mask`` qubits.

    Finds a generator product matching the query's Z part everywhere and its
    X part outside the mask; leftover X factors inside the mask are allowed
    (they read +1 in an all-X-up frame).  Returns (member, product sign on
    the unsigned string, product).
    """
    shift = 1 + max([query[2].bit_length(), query[1].bit_length()]
                    + [max(p[1].bit_length(), p[2].bit_length()) for p in generators])
    rows = [((p[1] & ~free_x_mask) << shift) | p[2] for p in generators]
    target = ((query[1] & ~free_x_mask) << shift) | query[2]
    combo = _gf2_solve(rows, target)
    if combo is None:
        return False, None, None
    prod = (0, 0, 0)
    for i, p in enumerate(generators):
        if (combo >> i) & 1:
            prod = pauli_mul(prod, p)
    psign = pauli_sign(prod)
    if psign is None:
        return False, None, None
    return True, psign, prod


# --------------------------------------------------------------- amplifier


@dataclass
class AmplifierGadget:
    graph: TwistedGraph
    root: int
    root_child: int
    leaves: tuple[int, ...]
    field_support: tuple[int, ...]  # shaded: everything but the leaves


def build_amplifier(levels: int) -> AmplifierGadget:
    """Tree with alternating degree-3 branch and degree-2 pass levels.

    The degree-1 root r hangs off the first branch node; each branch node
    feeds two pass nodes; after ``levels`` branchings every pass node ends
    in a leaf.  Leaf count is 2^levels.
    """
    if levels < 1:
        raise ValueError("need levels >= 1")
    angles: list[float] = []
    edges: set[frozenset[int]] = set()

    def new_vertex() -> int:
        angles.append(0.0)
        return len(angles)

    root = new_vertex()
    first_branch = new_vertex()
    edges.add(frozenset((root, first_branch)))
    leaves: list[int] = []
    frontier = [first_branch]
    for level in range(1, levels + 1):
        nxt = []
        for b in frontier:
            for _ in range(2):
                p = new_vertex()
                edges.add(frozenset((b, p)))
                child = new_vertex()
                edges.add(frozenset((p, child)))
                if level == levels:
                    leaves.append(child)
                else:
                    nxt.append(child)
        frontier = nxt
    graph = TwistedGraph(
        vertices=tuple((i + 1, a) for i, a in enumerate(angles)),
        edges=frozenset(edges),
        inputs=(root,),
        outputs=tuple(leaves),
        dropped_terms=frozenset({root}),
    )
    support = tuple(v for v, _ in graph.vertices if v not in leaves)
    return AmplifierGadget(graph, root, first_branch, tuple(leaves), support)


def _degree(graph: TwistedGraph, v: int) -> int:
    return len(graph.neighbors(v))


def verify_amplifier(gadget: AmplifierGadget, sweep_time: float = 150.0,
                     exact: bool = True) -> dict:
    """Tableau and exact checks of the amplifier's copy-and-split behavior."""
    graph = gadget.graph
    n = graph.n
    leaves = gadget.leaves
    stabs = graph_stabilizers(graph)
    tab = StabilizerTableau(n, stabs)
    nonleaf_mask = sum(1 << (v - 1) for v in gadget.field_support)

    report: dict = {"leaves": len(leaves)}
    # (a) leaf-pair Z_i Z_j: a graph-stabilizer product restricted to the
    # leaves (X factors on the field support read +1 after the sweep)
    rep_ok = True
    for i, a in enumerate(leaves):
        for b in leaves[i + 1:]:
            member, sign, _ = reduce_modulo(
                stabs, pauli_from_factors({a: "Z", b: "Z"}), nonleaf_mask)
            rep_ok &= member and sign == 1
    report["repetition_stabilizers"] = bool(rep_ok)
    rep_rank = _gf2_rank([(1 << (a - 1)) | (1 << (b - 1))
                         for i, a in enumerate(leaves) for b in leaves[i + 1:]])
    report["independent_leaf_generators"] = rep_rank

    # (b) logical transport: Z_r times branch and leaf stabilizers is X on the
    # leaves and X/I elsewhere; X_r Z_{r'} along any root-leaf path gives a
    # single leaf Z.
    zbar = pauli_from_factors({gadget.root: "Z"})
    prod = zbar
    for v, theta in graph.vertices:
        if v in graph.dropped_terms:
            continue
        if _degree(graph, v) == 3 or v in leaves:
            prod = pauli_mul(prod, _stab_of(graph, v))
    leafmask = sum(1 << (v - 1) for v in leaves)
    report["zbar_transport"] = (prod[2] == 0 and (prod[1] & leafmask) == leafmask
                                and pauli_sign(prod) == 1)

    xbar = pauli_from_factors({gadget.root: "X", gadget.root_child: "Z"})
    paths_ok = True
    reductions = []
    for leaf in (leaves[0], leaves[-1]):
        path = _root_leaf_path(graph, gadget.root, leaf)
        prod = xbar
        for v in path:
            if v not in graph.dropped_terms and _degree(graph, v) == 2:
                prod = pauli_mul(prod, _stab_of(graph, v))
        on_leaf = ((prod[2] >> (leaf - 1)) & 1) == 1
        z_elsewhere = prod[2] & ~(1 << (leaf - 1))
        paths_ok &= on_leaf and z_elsewhere == 0 and pauli_sign(prod) == 1
        reductions.append(prod)
    report["xbar_paths"] = bool(paths_ok)
    # path independence: the two reductions differ by a stabilizer element
    diff = pauli_mul(reductions[0], reductions[1])
    member, sign = tab.contains(diff)
    report["xbar_path_independent"] = bool(member and sign == pauli_sign(diff))

    if exact:
        if n > 14:
            raise ValueError("exact amplifier check bounded to 14 qubits")
        spec = InterpolationSpec(
            tuple(cluster_terms(graph)),
            tuple(PauliTerm(-1.0, {v: "X"}) for v in gadget.field_support),
            n, get_envelope("cosine"))
        h_end = ed.PauliAction(
            [PauliTerm(-1.0, {v: "X"}) for v in gadget.field_support]
            + [PauliTerm(1.0, {v: "Z"}) for v in leaves], n)
        h_end_sq = None
        energies = {}
        for sx in (+1, -1):
            constraints = ed.ground_signs(spec) + [
                (PauliTerm(1.0, {gadget.root: "X", gadget.root_child: "Z"}), sx)]
            psi0 = ed.joint_eigenstate(n, constraints)
            res = ed.adiabatic_evolve(spec, sweep_time, psi0)
            e = h_end.expectation(res.psi)
            hpsi = h_end.apply(res.psi)
            var = float(np.real(np.vdot(hpsi, hpsi))) - e * e
            energies[sx] = e
            report[f"end_variance_x{sx:+d}"] = var
        report["splitting"] = abs(energies[+1] - energies[-1])
    return report


def _stab_of(graph: TwistedGraph, v: int) -> Pauli:
    return pauli_from_factors({**{w: "Z" for w in graph.neighbors(v)}, v: "X"})


def _root_leaf_path(graph: TwistedGraph, root: int, leaf: int) -> list[int]:
    """Vertices on the unique tree path from root to leaf (inclusive)."""
    parent = {root: None}
    stack = [root]
    while stack:
        v = stack.pop()
        for w in graph.neighbors(v):
            if w not in parent:
                parent[w] = v
                stack.append(w)
    path = [leaf]
    while path[-1] != root:
        path.append(parent[path[-1]])
    return path[::-1]


def _gf2_rank(rows: Iterable[int]) -> int:
    basis: list[int] = []
    rank = 0
    for row in rows:
        cur = row
        for b in basis:
            cur = min(cur, cur ^ b)
        if cur:
            basis.append(cur)
            basis.sort(reverse=True)
            rank += 1
    return rank


# ------------------------------------------------------------------- router

# qubit ids for the fixed 4-qubit gadget on {1, 1', 2, o}
ROUTER_QUBITS = {"1": 1, "1p": 2, "2": 3, "o": 4}


def build_router() -> dict[str, list[PauliTerm]]:
    """The graph-free Hamiltonian triple (H_i, H_f, H_f')."""
    q = ROUTER_QUBITS
    h_i = [
        PauliTerm(-1.0, {q["2"]: "Z", q["1"]: "X"}),
        PauliTerm(+1.0, {q["2"]: "Z", q["1p"]: "X"}),
        PauliTerm(-1.0, {q["2"]: "Z", q["o"]: "X"}),
        PauliTerm(-1.0, {q["1"]: "Z", q["1p"]: "Z", q["o"]: "Z", q["2"]: "X"}),
    ]
    h_f = [PauliTerm(-1.0, {q["1"]: "X"}), PauliTerm(-1.0, {q["2"]: "X"})]
    h_fp = [PauliTerm(-1.0, {q["1p"]: "X"}), PauliTerm(-1.0, {q["2"]: "X"})]
    return {"h_i": h_i, "h_f": h_f, "h_fp": h_fp}


def router_code_operators() -> dict[str, PauliTerm]:
    q = ROUTER_QUBITS
    return {
        "S1": PauliTerm(1.0, {q["1"]: "X", q["1p"]: "X"}),
        "S2": PauliTerm(1.0, {q["1"]: "X", q["o"]: "X"}),
        "Zbar1": PauliTerm(1.0, {q["1"]: "Z", q["1p"]: "Z", q["o"]: "Z", q["2"]: "X"}),
        "Zbar2": PauliTerm(1.0, {q["2"]: "Z", q["1"]: "X"}),
        "Xo": PauliTerm(1.0, {q["o"]: "X"}),
    }


def verify_router(final_choice: str, T: float = 200.0,
                  gap_grid: int = 41) -> dict:
    """Sweep the router to H_f or H_f' and report <X_o>, sector gap, S1 drift."""
    if final_choice not in ("f", "fp"):
        raise ValueError("final_choice must be 'f' or 'fp'")
    ham = build_router()
    ops = router_code_operators()
    spec = InterpolationSpec(
        tuple(ham["h_i"]), tuple(ham["h_f" if final_choice == "f" else "h_fp"]),
        4, get_envelope("cosine"))
    constraints = [
        (ops["Zbar1"], +1), (ops["Zbar2"], +1), (ops["S1"], -1), (ops["S2"], +1)]
    psi0 = ed.joint_eigenstate(4, constraints)
    h_i_action = ed.PauliAction(ham["h_i"], 4)
    e0 = h_i_action.expectation(psi0)
    res = ed.adiabatic_evolve(spec, T, psi0)
    xo = ed.PauliAction([ops["Xo"]], 4).expectation(res.psi)
    s1_final = ed.PauliAction([ops["S1"]], 4).expectation(res.psi)
    # in-sector gap along the sweep: penalize the complementary sectors so the
    # low spectrum is the conserved (S1=-1, S2=+1) sector
    penalty = 25.0
    pen_terms = [ops["S1"].scaled(penalty / 2), ops["S2"].scaled(-penalty / 2)]
    min_gap = math.inf
    for s in np.linspace(0.0, 1.0, gap_grid):
        terms = [t.scaled(spec.envelope.f(s)) for t in spec.h_init if spec.envelope.f(s)]
        terms += [t.scaled(spec.envelope.g(s)) for t in spec.h_final if spec.envelope.g(s)]
        dense = ed.PauliAction(terms + pen_terms, 4).to_dense()
        eigs = np.linalg.eigvalsh(dense)
        min_gap = min(min_gap, float(eigs[1] - eigs[0]))
    return {
        "final": final_choice,
        "x_o": xo,
        "initial_energy": e0,
        "s1_conserved": abs(s1_final + 1.0),
        "min_sector_gap": min_gap,
    }


# --------------------------------------------------- Clifford transport oracle


def clifford_transport(graph: TwistedGraph) -> dict[str, Pauli]:
    """Heisenberg map of an untwisted compiled graph, via stabilizer reduction.

    For each input logical representative, multiplies vertex stabilizers to
    cancel every Z factor off the output qubits; in the final all-X-up ground
    space the remainder acts as a signed Pauli on the outputs alone.  Keys
    are 'X0', 'Z0', 'X1', ... per logical input; masks are global but the
    x-part off the outputs reads +1 at the end of the sweep.
    """
    if any(theta != 0.0 for _, theta in graph.vertices):
        raise ValueError("transport oracle requires an untwisted graph")
    stabs = [_stab_of(graph, v) for v, _ in graph.vertices
             if v not in graph.dropped_terms]
    out_mask = sum(1 << (v - 1) for v in graph.outputs)
    n = graph.n
    rows = [p[2] & ~out_mask for p in stabs]  # z-masks off the outputs
    result = {}
    for j, v in enumerate(graph.inputs):
        xbar = _stab_of(graph, v)  # X_v prod Z_neigh, the would-be vertex term
        zbar = pauli_from_factors({v: "Z"})
        for name, logical in ((f"X{j}", xbar), (f"Z{j}", zbar)):
            combo = _gf2_solve(rows, logical[2] & ~out_mask)
            if combo is None:
                raise RuntimeError(f"no stabilizer reduction for {name}")
            prod = logical
            for i in range(len(stabs)):
                if (combo >> i) & 1:
                    prod = pauli_mul(prod, stabs[i])
            if prod[2] & ~out_mask:
                raise RuntimeError("reduction left Z factors off the outputs")
            result[name] = prod
    return result


def _gf2_solve(rows: list[int], target: int) -> int | None:
    """Subset of rows XORing to target, as a bitmask; None when unsolvable."""
    basis: list[tuple[int, int]] = []
    for i, row in enumerate(rows):
        cur, mask = row, 1 << i
        for brow, bmask in basis:
            if (cur ^ brow) < cur:
                cur ^= brow
                mask ^= bmask
        if cur:
            basis.append((cur, mask))
            basis.sort(reverse=True)
    cur, mask = target, 0
    for brow, bmask in basis:
        if (cur ^ brow) < cur:
            cur ^= brow
            mask ^= bmask
    return mask if cur == 0 else None
