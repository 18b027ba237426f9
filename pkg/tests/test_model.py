import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqtlab.model import (ENVELOPES, InterpolationSpec, PauliTerm, TwistedGraph,
                          assemble, build_square_lattice, build_twisted_chain,
                          build_wire, cluster_terms, factor_matrix,
                          factors_commute, mirror_twists, site_id,
                          spec_from_graph)


def chain_graph(n, angles=None, dropped=frozenset()):
    angles = angles or [0.0] * n
    return TwistedGraph(
        vertices=tuple((i + 1, angles[i]) for i in range(n)),
        edges=frozenset(frozenset((i, i + 1)) for i in range(1, n)),
        dropped_terms=dropped,
    )


def term_set(terms):
    return {(round(t.coefficient, 12), tuple(sorted(t.factors.items())))
            for t in terms}


class TestTwistedGraph:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            TwistedGraph(vertices=((1, 0.0), (2, 0.0)),
                         edges=frozenset([frozenset((1, 1))]))

    def test_rejects_unknown_io(self):
        with pytest.raises(ValueError):
            TwistedGraph(vertices=((1, 0.0),), edges=frozenset(), inputs=(3,))

    def test_rejects_degree_5(self):
        edges = frozenset(frozenset((1, k)) for k in range(2, 7))
        with pytest.raises(ValueError):
            TwistedGraph(vertices=tuple((i, 0.0) for i in range(1, 7)), edges=edges)

    def test_angles_reduced_mod_2pi(self):
        g = chain_graph(2, [2 * math.pi + 0.25, -0.25])
        assert g.angle(1) == pytest.approx(0.25)
        assert 0 <= g.angle(2) < 2 * math.pi

    def test_json_roundtrip(self):
        g, _ = build_wire(5)
        g2 = TwistedGraph.from_json(g.to_json())
        assert g2 == g
        obj = json.loads(g.to_json())
        assert set(obj) == {"n", "angles", "edges", "inputs", "outputs", "dropped"}


class TestClusterTerms:
    def test_three_chain_untwisted(self):
        # {-X1 Z2, -Z1 X2 Z3, -Z2 X3} on a path
        g = chain_graph(3)
        assert term_set(cluster_terms(g)) == {
            (-1.0, ((1, "X"), (2, "Z"))),
            (-1.0, ((1, "Z"), (2, "X"), (3, "Z"))),
            (-1.0, ((2, "Z"), (3, "X"))),
        }

    def test_single_vertex_y(self):
        g = TwistedGraph(vertices=((1, math.pi / 2),), edges=frozenset())
        terms = cluster_terms(g)
        assert term_set(terms) == {(-1.0, ((1, "Y"),))}

    def test_2x2_lattice_by_enumeration(self):
        # independent enumeration of the 4-cycle: X on each site, Z on its 2
        # lattice neighbors
        g, spec = build_square_lattice(2)
        want = set()
        for i in (1, 2):
            for j in (1, 2):
                v = site_id(i, j, 2)
                neigh = []
                for (di, dj) in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    a, b = i + di, j + dj
                    if 1 <= a <= 2 and 1 <= b <= 2:
                        neigh.append(site_id(a, b, 2))
                want.add((-1.0, tuple(sorted([(v, "X")] + [(w, "Z") for w in neigh]))))
        assert term_set(spec.h_init) == want
        assert len(spec.h_init) == 4 and len(spec.h_final) == 4

    def test_dropped_terms_respected(self):
        g = chain_graph(4, dropped=frozenset({2}))
        assert len(cluster_terms(g)) == 3

    def test_term_count_matches_vertices(self):
        g, _ = build_square_lattice(3)
        assert len(cluster_terms(g)) == 9


class TestBuildWire:
    def test_n3_printed_terms(self):
        # h_init = -(-Z2 X3 + Z1 X2 Z3), h_final = -(X1 + X2)
        _, spec = build_wire(3)
        assert term_set(spec.h_init) == {
            (-1.0, ((1, "Z"), (2, "X"), (3, "Z"))),
            (1.0, ((2, "Z"), (3, "X"))),
        }
        assert term_set(spec.h_final) == {
            (-1.0, ((1, "X"),)), (-1.0, ((2, "X"),))}

    def test_n2_minimal(self):
        _, spec = build_wire(2)
        assert term_set(spec.h_init) == {(1.0, ((1, "Z"), (2, "X")))}
        assert term_set(spec.h_final) == {(-1.0, ((1, "X"),))}

    def test_markers(self):
        g, _ = build_wire(6)
        assert g.inputs == (1,) and g.outputs == (6,)
        assert g.dropped_terms == frozenset({1})

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            build_wire(1)


class TestSquareLattice:
    def test_symmetry_enforced(self):
        with pytest.raises(ValueError):
            build_square_lattice(3, {(1, 2): 0.3, (2, 1): 0.9}, dual_symmetric=True)

    def test_symmetric_accepted(self, rng):
        angles = {}
        for i in range(1, 4):
            for j in range(i, 4):
                th = rng.uniform(0, 2 * math.pi)
                angles[(i, j)] = th
                angles[(j, i)] = th
        g, spec = build_square_lattice(3, angles, dual_symmetric=True)
        assert g.n == 9

    def test_field_covers_all_sites(self):
        _, spec = build_square_lattice(2)
        assert len(spec.h_final) == 4


class TestAssemble:
    def test_endpoints(self):
        _, spec = build_wire(4)
        assert term_set(assemble(spec, 0.0)) == term_set(spec.h_init)
        assert term_set(assemble(spec, 1.0)) == term_set(spec.h_final)

    def test_midpoint_halves(self):
        _, spec = build_wire(4)
        terms = assemble(spec, 0.5)
        assert all(abs(t.coefficient) == 0.5 for t in terms)

    def test_rejects_out_of_range(self):
        _, spec = build_wire(4)
        with pytest.raises(ValueError):
            assemble(spec, 1.5)

    def test_envelope_reflection(self):
        _, spec = build_wire(5)
        for s in (0.2, 0.7):
            a = term_set(assemble(spec.reflected(), s))
            b = term_set(assemble(spec, 1.0 - s))
            assert a == b


class TestCommutation:
    @given(st.integers(min_value=2, max_value=25), st.randoms(use_true_random=False))
    @settings(max_examples=25, deadline=None)
    def test_cluster_terms_commute_on_chains(self, n, rnd):
        angles = [rnd.uniform(0, 2 * math.pi) for _ in range(n)]
        g = chain_graph(n, angles)
        terms = cluster_terms(g)
        for i, a in enumerate(terms):
            for b in terms[i + 1:]:
                assert a.commutes_with(b)

    def test_cluster_terms_commute_on_lattice(self, rng):
        for L in (2, 3, 5):
            angles = {(i, j): rng.uniform(0, 2 * math.pi)
                      for i in range(1, L + 1) for j in range(1, L + 1)}
            g, _ = build_square_lattice(L, angles)
            terms = cluster_terms(g)
            for i, a in enumerate(terms):
                for b in terms[i + 1:]:
                    assert a.commutes_with(b)

    def test_factor_commutation_matches_matrices(self, rng):
        factors = ["X", "Y", "Z", 0.3, 1.7, 4.0]
        for f1 in factors:
            for f2 in factors:
                m1, m2 = factor_matrix(f1), factor_matrix(f2)
                comm = np.allclose(m1 @ m2, m2 @ m1)
                assert comm == factors_commute(f1, f2)


class TestMirrorTwists:
    @given(st.integers(min_value=2, max_value=40))
    @settings(max_examples=20, deadline=None)
    def test_symmetry(self, n):
        rng = np.random.default_rng(n)
        tw = mirror_twists(rng.uniform(0, 2 * math.pi, (n - 2 + 1) // 2), n)
        assert len(tw) == n - 2
        for i in range(n - 2):
            assert tw[i] == pytest.approx(tw[n - 3 - i])

    def test_boundary_sign_gauge_graphs(self):
        gm, sm = build_twisted_chain(5, [0.4, 0.9, 0.4], boundary_sign=-1)
        gp, sp = build_twisted_chain(5, [0.4, 0.9, 0.4], boundary_sign=1)
        assert gm == gp  # only the interpolation differs
        cm = sorted(t.coefficient for t in sm.h_init)
        cp = sorted(t.coefficient for t in sp.h_init)
        assert cm != cp


class TestEnvelopes:
    @pytest.mark.parametrize("name", sorted(ENVELOPES))
    def test_boundary_conditions(self, name):
        env = ENVELOPES[name]
        assert env.f(0.0) == pytest.approx(1.0)
        assert env.g(0.0) == pytest.approx(0.0, abs=1e-15)
        assert env.f(1.0) == pytest.approx(0.0, abs=1e-15)
        assert env.g(1.0) == pytest.approx(1.0)


class TestPauliTerm:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            PauliTerm(1.0, {})

    def test_rejects_zero_coefficient(self):
        with pytest.raises(ValueError):
            PauliTerm(0.0, {1: "X"})

    def test_axis_normalization(self):
        t = PauliTerm(1.0, {1: 0.0, 2: math.pi / 2, 3: 1.0})
        assert t.factors[1] == "X"
        assert t.factors[2] == "Y"
        assert isinstance(t.factors[3], float)
