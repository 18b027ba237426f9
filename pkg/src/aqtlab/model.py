"""Twisted cluster graphs, Pauli terms, and interpolating Hamiltonians.

A twisted cluster graph carries one qubit per vertex; each vertex v with
angle theta_v contributes a term -(cos(theta_v) X_v + sin(theta_v) Y_v)
prod_{w ~ v} Z_w.  Interpolation specs pair such a Hamiltonian with a
final field Hamiltonian and an envelope (f, g) over scaled time s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

TWO_PI = 2.0 * math.pi

# A single-qubit factor is either the axis label 'X', 'Y', 'Z' or an angle
# theta (radians) meaning the XY-plane operator cos(theta) X + sin(theta) Y.
Factor = Union[str, float]

_AXES = ("X", "Y", "Z")


def normalize_factor(f: Factor) -> Factor:
    """Canonicalize a factor; angles that hit a Pauli axis become that axis."""
    if isinstance(f, str):
        if f not in _AXES:
            raise ValueError(f"unknown factor {f!r}")
        return f
    ang = float(f) % TWO_PI
    if not math.isfinite(ang):
        raise ValueError("factor angle must be finite")
    if ang == 0.0:
        return "X"
    if ang == math.pi / 2:
        return "Y"
    return ang


def factor_xy_angle(f: Factor) -> float | None:
    """XY-plane angle of a factor, or None for Z."""
    if f == "Z":
        return None
    if f == "X":
        return 0.0
    if f == "Y":
        return math.pi / 2
    return float(f)


def factor_matrix(f: Factor) -> np.ndarray:
    """2x2 matrix of a factor; XY(theta) = [[0, e^-it], [e^it, 0]]."""
    if f == "Z":
        return np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    theta = factor_xy_angle(f)
    return np.array([[0.0, np.exp(-1j * theta)], [np.exp(1j * theta), 0.0]])


def factors_commute(f1: Factor, f2: Factor) -> bool:
    """Whether two single-qubit factors commute."""
    a1, a2 = factor_xy_angle(f1), factor_xy_angle(f2)
    if (a1 is None) != (a2 is None):
        return False  # Z against any XY-plane operator anticommutes
    if a1 is None:
        return True
    return abs(math.sin(a1 - a2)) < 1e-14


@dataclass(frozen=True)
class PauliTerm:
    """A weighted product of single-qubit factors on distinct vertices."""

    coefficient: float
    factors: Mapping[int, Factor]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("PauliTerm requires at least one factor")
        if not math.isfinite(self.coefficient) or self.coefficient == 0.0:
            raise ValueError("coefficient must be finite and non-zero")
        object.__setattr__(
            self,
            "factors",
            {int(v): normalize_factor(f) for v, f in self.factors.items()},
        )

    def scaled(self, scale: float) -> "PauliTerm":
        return PauliTerm(self.coefficient * scale, self.factors)

    def commutes_with(self, other: "PauliTerm") -> bool:
        """Symplectic-style check: even number of anticommuting positions."""
        n_anti = 0
        for v, f in self.factors.items():
            g = other.factors.get(v)
            if g is not None and not factors_commute(f, g):
                n_anti += 1
        return n_anti % 2 == 0

    def support(self) -> frozenset[int]:
        return frozenset(self.factors)


@dataclass(frozen=True)
class TwistedGraph:
    """Vertices with twist angles, edges, and input/output markers.

    Vertex ids are dense integers 1..n.  ``dropped_terms`` lists vertices
    whose cluster term is omitted from the Hamiltonian (encoding heads).
    """

    vertices: tuple[tuple[int, float], ...]
    edges: frozenset[frozenset[int]]
    inputs: tuple[int, ...] = ()
    outputs: tuple[int, ...] = ()
    dropped_terms: frozenset[int] = frozenset()

    def __post_init__(self):
        verts = tuple((int(v), float(a) % TWO_PI) for v, a in self.vertices)
        ids = [v for v, _ in verts]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("vertex ids must be dense integers 1..n in order")
        if any(not math.isfinite(a) for _, a in verts):
            raise ValueError("angles must be finite")
        edges = frozenset(frozenset((int(a), int(b))) for a, b in self.edges)
        idset = set(ids)
        for e in edges:
            if len(e) != 2:
                raise ValueError("self-loops are not allowed")
            if not e <= idset:
                raise ValueError(f"edge {sorted(e)} references unknown vertex")
        degree = {v: 0 for v in ids}
        for e in edges:
            for v in e:
                degree[v] += 1
        if degree and max(degree.values()) > 4:
            raise ValueError("vertex degree must be <= 4")
        for v in tuple(self.inputs) + tuple(self.outputs):
            if v not in idset:
                raise ValueError(f"input/output vertex {v} does not exist")
        dropped = frozenset(int(v) for v in self.dropped_terms)
        if not dropped <= idset:
            raise ValueError("dropped_terms references unknown vertex")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "inputs", tuple(int(v) for v in self.inputs))
        object.__setattr__(self, "outputs", tuple(int(v) for v in self.outputs))
        object.__setattr__(self, "dropped_terms", dropped)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def angle(self, v: int) -> float:
        return self.vertices[v - 1][1]

    def neighbors(self, v: int) -> list[int]:
        out = [next(iter(e - {v})) for e in self.edges if v in e]
        return sorted(out)

    def to_json(self) -> str:
        """Serialize to the exchange format shared by all tools."""
        obj = {
            "n": self.n,
            "angles": [a for _, a in self.vertices],
            "edges": sorted(sorted(e) for e in self.edges),
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "dropped": sorted(self.dropped_terms),
        }
        return json.dumps(obj, indent=1)

    @staticmethod
    def from_json(text: str) -> "TwistedGraph":
        obj = json.loads(text)
        n = int(obj["n"])
        angles = obj["angles"]
        if len(angles) != n:
            raise ValueError("angles list must have length n")
        return TwistedGraph(
            vertices=tuple((i + 1, float(a)) for i, a in enumerate(angles)),
            edges=frozenset(frozenset(map(int, e)) for e in obj["edges"]),
            inputs=tuple(obj.get("inputs", ())),
            outputs=tuple(obj.get("outputs", ())),
            dropped_terms=frozenset(obj.get("dropped", ())),
        )


def _linear_f(s: float) -> float:
    return 1.0 - s


def _linear_g(s: float) -> float:
    return s


def _cosine_f(s: float) -> float:
    return 0.5 * (1.0 + math.cos(math.pi * s))


def _cosine_g(s: float) -> float:
    return 0.5 * (1.0 - math.cos(math.pi * s))


@dataclass(frozen=True)
class Envelope:
    """Named pair (f, g) of interpolation envelopes with f(0)=g(1)=1, f(1)=g(0)=0."""

    name: str
    f: Callable[[float], float]
    g: Callable[[float], float]


ENVELOPES = {
    "linear": Envelope("linear", _linear_f, _linear_g),
    # C^1 at the endpoints; useful when adiabatic error at fixed sweep time matters
    "cosine": Envelope("cosine", _cosine_f, _cosine_g),
}


def get_envelope(name: str) -> Envelope:
    try:
        return ENVELOPES[name]
    except KeyError:
        raise ValueError(f"unknown envelope {name!r}") from None


@dataclass(frozen=True)
class InterpolationSpec:
    """One adiabatic problem instance: H(s) = f(s) h_init + g(s) h_final."""

    h_init: tuple[PauliTerm, ...]
    h_final: tuple[PauliTerm, ...]
    n_qubits: int
    envelope: Envelope = ENVELOPES["linear"]

    def __post_init__(self):
        object.__setattr__(self, "h_init", tuple(self.h_init))
        object.__setattr__(self, "h_final", tuple(self.h_final))
        for term in self.h_init + self.h_final:
            for v in term.factors:
                if not (1 <= v <= self.n_qubits):
                    raise ValueError(f"term references vertex {v} outside 1..{self.n_qubits}")

    def reflected(self) -> "InterpolationSpec":
        """Same instance with the roles of h_init and h_final swapped."""
        return InterpolationSpec(self.h_final, self.h_init, self.n_qubits, self.envelope)


def cluster_terms(graph: TwistedGraph) -> list[PauliTerm]:
    """One term per non-dropped vertex: -[theta_v]_v prod_{w ~ v} Z_w."""
    terms = []
    for v, theta in graph.vertices:
        if v in graph.dropped_terms:
            continue
        factors: dict[int, Factor] = {v: theta}
        for w in graph.neighbors(v):
            factors[w] = "Z"
        terms.append(PauliTerm(-1.0, factors))
    return terms


def field_terms(graph: TwistedGraph, exclude: Iterable[int] = ()) -> list[PauliTerm]:
    """Final-field terms -X_v on every vertex not excluded."""
    skip = set(exclude)
    return [PauliTerm(-1.0, {v: "X"}) for v, _ in graph.vertices if v not in skip]


def build_wire(n: int, boundary_sign: int = -1,
               envelope: str = "linear") -> tuple[TwistedGraph, InterpolationSpec]:
    """Untwisted n-qubit wire with the head term dropped.

    ``boundary_sign`` is the relative sign of the Z_{n-1} X_n term inside
    h_init; -1 reproduces the printed convention, +1 the plain cluster
    Hamiltonian.  The two choices are gauge equivalent (conjugation by Z_n).
    """
    if n < 2:
        raise ValueError("wire needs n >= 2")
    if boundary_sign not in (-1, 1):
        raise ValueError("boundary_sign must be +1 or -1")
    graph = TwistedGraph(
        vertices=tuple((v, 0.0) for v in range(1, n + 1)),
        edges=frozenset(frozenset((v, v + 1)) for v in range(1, n)),
        inputs=(1,),
        outputs=(n,),
        dropped_terms=frozenset({1}),
    )
    h_init = []
    for t in cluster_terms(graph):
        if t.factors.get(n) == "X":  # boundary term Z_{n-1} X_n
            t = t.scaled(float(boundary_sign))
        h_init.append(t)
    h_final = field_terms(graph, exclude=graph.outputs)
    spec = InterpolationSpec(tuple(h_init), tuple(h_final), n, get_envelope(envelope))
    return graph, spec


def build_twisted_chain(n: int, twists: Sequence[float], boundary_sign: int = -1,
                        envelope: str = "linear") -> tuple[TwistedGraph, InterpolationSpec]:
    """Wire with twist angles on the interior vertices 2..n-1.

    ``twists[i]`` is the angle of vertex i+2; the head term stays dropped and
    the boundary term untwisted, as in the plain wire.
    """
    if n < 2:
        raise ValueError("chain needs n >= 2")
    twists = tuple(float(t) for t in twists)
    if len(twists) != n - 2:
        raise ValueError(f"expected {n - 2} twist angles, got {len(twists)}")
    if boundary_sign not in (-1, 1):
        raise ValueError("boundary_sign must be +1 or -1")
    angles = (0.0,) + twists + (0.0,)
    graph = TwistedGraph(
        vertices=tuple((v, angles[v - 1]) for v in range(1, n + 1)),
        edges=frozenset(frozenset((v, v + 1)) for v in range(1, n)),
        inputs=(1,),
        outputs=(n,),
        dropped_terms=frozenset({1}),
    )
    h_init = []
    for t in cluster_terms(graph):
        if t.factors.get(n) == "X":
            t = t.scaled(float(boundary_sign))
        h_init.append(t)
    h_final = field_terms(graph, exclude=graph.outputs)
    spec = InterpolationSpec(tuple(h_init), tuple(h_final), n, get_envelope(envelope))
    return graph, spec


def mirror_twists(draw: Sequence[float], n: int) -> tuple[float, ...]:
    """Impose the duality symmetry theta_i = theta_{n-i-1} on n-2 interior angles.

    ``draw`` supplies the first ceil((n-2)/2) free angles.
    """
    m = n - 2
    need = (m + 1) // 2
    if len(draw) < need:
        raise ValueError(f"need {need} free angles")
    half = list(draw[:need])
    return tuple(half + half[: m - need][::-1])


def site_id(i: int, j: int, L: int) -> int:
    """Row-major vertex id of 1-based lattice coordinates (i, j)."""
    return (i - 1) * L + j


def build_square_lattice(L: int, angles: Mapping[tuple[int, int], float] | None = None,
                         dual_symmetric: bool = False,
                         envelope: str = "linear") -> tuple[TwistedGraph, InterpolationSpec]:
    """L x L grid with the full twisted cluster Hamiltonian and an all-site field.

    Out-of-range neighbors are simply absent (open boundaries).  With
    ``dual_symmetric`` the angle map must satisfy theta_(i,j) = theta_(j,i).
    """
    if L < 2:
        raise ValueError("lattice needs L >= 2")
    angles = dict(angles or {})
    if dual_symmetric:
        for (i, j), th in angles.items():
            mirrored = angles.get((j, i), 0.0)
            if abs((th - mirrored + math.pi) % TWO_PI - math.pi) > 1e-12:
                raise ValueError(f"dual symmetry violated at {(i, j)}")
    verts = []
    for i in range(1, L + 1):
        for j in range(1, L + 1):
            verts.append((site_id(i, j, L), angles.get((i, j), 0.0)))
    edges = set()
    for i in range(1, L + 1):
        for j in range(1, L + 1):
            if i < L:
                edges.add(frozenset((site_id(i, j, L), site_id(i + 1, j, L))))
            if j < L:
                edges.add(frozenset((site_id(i, j, L), site_id(i, j + 1, L))))
    graph = TwistedGraph(vertices=tuple(verts), edges=frozenset(edges))
    spec = InterpolationSpec(
        tuple(cluster_terms(graph)),
        tuple(field_terms(graph)),
        L * L,
        get_envelope(envelope),
    )
    return graph, spec


def assemble(spec: InterpolationSpec, s: float) -> list[PauliTerm]:
    """Term list of H(s); zero-weight terms are dropped."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    f, g = spec.envelope.f(s), spec.envelope.g(s)
    terms = []
    for t in spec.h_init:
        if f != 0.0:
            terms.append(t.scaled(f))
    for t in spec.h_final:
        if g != 0.0:
            terms.append(t.scaled(g))
    return terms


def spec_from_graph(graph: TwistedGraph, envelope: str = "linear") -> InterpolationSpec:
    """Standard interpolation for a graph: cluster terms -> field off outputs."""
    return InterpolationSpec(
        tuple(cluster_terms(graph)),
        tuple(field_terms(graph, exclude=graph.outputs)),
        graph.n,
        get_envelope(envelope),
    )
