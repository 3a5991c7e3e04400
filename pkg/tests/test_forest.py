"""Forest representation, net-respecting rewrites, chains, crossings."""

from __future__ import annotations

import itertools
import random

import pytest

from conftest import line_metric
from sfp_ptas.baselines import dreyfus_wagner, mst_forest
from sfp_ptas.errors import NotATreeError, PreconditionUnverifiable
from sfp_ptas.forest import (
    Forest,
    component_edges,
    components,
    crossing_components,
    find_longest_steiner_chain,
    is_net_respecting,
    make_net_respecting,
    steiner_proximity_check,
)
from sfp_ptas.metric import build_hierarchy, build_metric


class TestForestBasics:
    def test_empty_forest_weight_zero(self):
        m = line_metric(range(3))
        assert Forest.from_edges(m, []).weight() == 0

    def test_single_edge_weight_is_distance(self):
        m = line_metric([0, 7])
        f = Forest.from_edges(m, [(0, 1)])
        assert f.weight() == m.dist(0, 1) == 7

    def test_two_unit_edges_weight(self):
        m = line_metric(range(3))
        assert Forest.from_edges(m, [(0, 1), (1, 2)]).weight() == 2

    def test_edges_deduplicated_and_normalized(self):
        m = line_metric(range(3))
        f = Forest.from_edges(m, [(2, 1), (1, 2), (1, 2)])
        assert f.edges == ((1, 2),)

    def test_self_loops_discarded(self):
        m = line_metric(range(3))
        assert Forest.from_edges(m, [(1, 1)]).edges == ()

    def test_vertices_and_adjacency(self):
        m = line_metric(range(4))
        f = Forest.from_edges(m, [(0, 2), (2, 3)])
        assert f.vertices() == (0, 2, 3)
        assert f.adjacency()[2] == [0, 3]


class TestComponents:
    def test_empty_forest_has_no_components(self):
        m = line_metric(range(3))
        assert components(Forest.from_edges(m, [])) == []

    def test_single_edge_single_component(self):
        m = line_metric(range(3))
        comps = components(Forest.from_edges(m, [(0, 1)]))
        assert comps == [frozenset({0, 1})]

    def test_two_disjoint_edges(self):
        m = line_metric(range(4))
        comps = components(Forest.from_edges(m, [(0, 1), (2, 3)]))
        assert comps == [frozenset({0, 1}), frozenset({2, 3})]

    def test_component_edges_restrict_to_members(self):
        m = line_metric(range(4))
        f = Forest.from_edges(m, [(0, 1), (2, 3)])
        assert component_edges(f, frozenset({2, 3})) == ((2, 3),)


class TestNetRespecting:
    def test_already_conforming_forest_unchanged(self):
        m = line_metric(range(3))
        hier = build_hierarchy(m, s=4)
        f = Forest.from_edges(m, [(0, 1)])
        assert make_net_respecting(f, hier, 0.5).edges == f.edges

    def test_long_edge_rewritten_through_net_points(self):
        # points at 0, 1, 15, 16: the only level-1 net points are 0 and 15,
        # so the long edge (1, 16) must route 1 -> 0 -> 15 -> 16
        m = line_metric([0, 1, 15, 16])
        hier = build_hierarchy(m, s=4)
        assert hier.net(1) == [0, 2]
        f = Forest.from_edges(m, [(1, 3)])
        nr = make_net_respecting(f, hier, 0.5)
        assert set(nr.edges) == {(0, 1), (0, 2), (2, 3)}
        assert is_net_respecting(nr, hier, 0.5)
        assert not is_net_respecting(f, hier, 0.5)

    def test_connectivity_preserved_on_random_forests(self):
        rng = random.Random(13)
        for _ in range(10):
            n = rng.randint(4, 10)
            pts = [(rng.uniform(0, 50), rng.uniform(0, 50)) for _ in range(n)]
            m = build_metric(points=pts, coord_scale=100)
            hier = build_hierarchy(m, s=4)
            edges = {
                tuple(sorted(rng.sample(range(n), 2)))
                for _ in range(rng.randint(1, n))
            }
            f = Forest.from_edges(m, edges)
            nr = make_net_respecting(f, hier, 0.5)
            assert is_net_respecting(nr, hier, 0.5)
            # same pairs connected before and after
            def reach(forest):
                comp = {}
                for ci, c in enumerate(components(forest)):
                    for v in c:
                        comp[v] = ci
                return {
                    (a, b)
                    for a, b in itertools.combinations(sorted(comp), 2)
                    if comp[a] == comp[b]
                }
            assert reach(f) <= reach(nr)

    def test_rewrite_overhead_is_bounded(self):
        rng = random.Random(3)
        worst = 0.0
        for _ in range(10):
            pts = [(rng.uniform(0, 80), rng.uniform(0, 80)) for _ in range(8)]
            m = build_metric(points=pts, coord_scale=100)
            hier = build_hierarchy(m, s=4)
            f = mst_forest(m, list(range(8)))
            nr = make_net_respecting(f, hier, 0.5)
            if f.weight():
                worst = max(worst, nr.weight() / f.weight())
        # documented engineering bound: small constant blow-up at eps=1/2
        assert worst <= 3.0


class TestSteinerChain:
    def test_star_returns_heaviest_spoke(self):
        # center 0 joins terminals 1, 2, 3; every spoke is its own chain
        m = build_metric(points=[(0, 0), (3, 0), (0, 4), (-5, 0)], coord_scale=1)
        f = Forest.from_edges(m, [(0, 1), (0, 2), (0, 3)])
        chain = find_longest_steiner_chain(f, [1, 2, 3])
        assert chain is not None
        assert chain.weight == m.dist(0, 3)
        assert set(chain.vertices) == {0, 3}

    def test_interior_steiner_path_is_one_chain(self):
        m = line_metric([0, 2, 5, 9])
        f = Forest.from_edges(m, [(0, 1), (1, 2), (2, 3)])
        chain = find_longest_steiner_chain(f, [0, 3])
        assert chain is not None
        assert chain.vertices in ((0, 1, 2, 3), (3, 2, 1, 0))
        assert chain.weight == 9

    def test_edgeless_forest_has_no_chain(self):
        m = line_metric(range(3))
        assert find_longest_steiner_chain(Forest.from_edges(m, []), [0]) is None

    def test_cycle_rejected(self):
        m = build_metric(points=[(0, 0), (1, 0), (0, 1)], coord_scale=1)
        f = Forest.from_edges(m, [(0, 1), (1, 2), (0, 2)])
        with pytest.raises(NotATreeError):
            find_longest_steiner_chain(f, [0])

    def test_disconnected_forest_rejected(self):
        m = line_metric(range(4))
        f = Forest.from_edges(m, [(0, 1), (2, 3)])
        with pytest.raises(NotATreeError):
            find_longest_steiner_chain(f, [0, 3])

    def test_matches_exhaustive_path_enumeration(self):
        rng = random.Random(21)
        for trial in range(15):
            n = rng.randint(3, 9)
            pts = [(rng.uniform(0, 30), rng.uniform(0, 30)) for _ in range(n)]
            m = build_metric(points=pts, coord_scale=100)
            # random tree via random parent links
            edges = [(i, rng.randrange(i)) for i in range(1, n)]
            f = Forest.from_edges(m, edges)
            terminals = sorted(rng.sample(range(n), rng.randint(1, n)))
            chain = find_longest_steiner_chain(f, terminals)
            best = self._brute_force_longest(f, m, terminals)
            if best is None:
                assert chain is None
            else:
                assert chain is not None and chain.weight == best

    @staticmethod
    def _brute_force_longest(f, m, terminals):
        """Max weight over all simple paths whose interior vertices are
        degree-2 non-terminals (endpoint maximality follows automatically)."""
        adj = f.adjacency()
        term = set(terminals)
        best = None

        def extend(path, weight):
            nonlocal best
            if len(path) >= 2:
                if best is None or weight > best:
                    best = weight
            tail = path[-1]
            if len(path) >= 2 and (tail in term or len(adj[tail]) != 2):
                return  # tail is a joint: the chain cannot continue
            for nxt in adj.get(tail, ()):
                if nxt not in path:
                    extend(path + [nxt], weight + m.dist(tail, nxt))

        for start in adj:
            extend([start], 0)
        return best


class TestCrossingComponents:
    def test_forest_inside_cluster_has_no_crossings(self):
        m = line_metric(range(5))
        f = Forest.from_edges(m, [(0, 1)])
        member = [True, True, True, False, False]
        assert crossing_components(f, member) == []

    def test_straddling_edge_is_a_crossing_component(self):
        m = line_metric(range(4))
        f = Forest.from_edges(m, [(1, 2)])
        member = [True, True, False, False]
        assert crossing_components(f, member) == [frozenset({1, 2})]

    def test_matches_membership_filter(self):
        rng = random.Random(5)
        for _ in range(10):
            n = rng.randint(4, 10)
            m = line_metric(range(n))
            edges = {
                tuple(sorted(rng.sample(range(n), 2))) for _ in range(n // 2)
            }
            f = Forest.from_edges(m, edges)
            member = [rng.random() < 0.5 for _ in range(n)]
            expected = [
                c
                for c in components(f)
                if any(member[v] for v in c) and any(not member[v] for v in c)
            ]
            assert crossing_components(f, member) == expected


class TestSteinerProximity:
    def test_tree_without_steiner_points_passes(self):
        m = line_metric([0, 5])
        f = Forest.from_edges(m, [(0, 1)])
        report = steiner_proximity_check(f, [0, 1], 1.0, 1, assume_optimal=True)
        assert report.ok and report.worst_vertex is None

    def test_unattested_tree_rejected(self):
        m = line_metric([0, 5])
        f = Forest.from_edges(m, [(0, 1)])
        with pytest.raises(PreconditionUnverifiable):
            steiner_proximity_check(f, [0, 1], 1.0, 1)

    def test_optimal_hub_tree_within_bound(self):
        # exact optimum for three spread terminals routes through the hub
        m = build_metric(points=[(0, 0), (10, 0), (5, 9), (5, 3)], coord_scale=1)
        cost, edges = dreyfus_wagner(m, [0, 1, 2], [3])
        assert cost == 18
        f = Forest.from_edges(m, edges)
        gamma = max(m.dist(a, b) for a, b in f.edges) / max(
            m.dist(a, b) for a in (0, 1, 2) for b in (0, 1, 2)
        )
        report = steiner_proximity_check(f, [0, 1, 2], gamma, 2, assume_optimal=True)
        assert report.ok
