"""Exact oracle, subset-MST cross-check, primal-dual, MST utilities."""

from __future__ import annotations

import random

import pytest

from conftest import line_metric, no_cheaper_edge_subset
from sfp_ptas.baselines import (
    OracleBudget,
    brute_force_forest,
    demand_bundles,
    dreyfus_wagner,
    mst_forest,
    primal_dual_forest,
    set_partitions,
    subset_mst_forest_cost,
)
from sfp_ptas.errors import BudgetExceededError
from sfp_ptas.instance import SfpInstance, is_feasible
from sfp_ptas.metric import build_metric


def _random_instance(rng, n_points, n_pairs, spread=50):
    pts = [(rng.uniform(0, spread), rng.uniform(0, spread)) for _ in range(n_points)]
    m = build_metric(points=pts, coord_scale=10)
    pairs = [tuple(rng.sample(range(n_points), 2)) for _ in range(n_pairs)]
    return SfpInstance.make(m, pairs, 2)


class TestMst:
    def test_single_point_empty(self):
        m = line_metric([0])
        assert mst_forest(m, [0]).edges == ()

    def test_two_points_single_edge(self):
        m = line_metric([0, 9])
        f = mst_forest(m, [0, 1])
        assert f.edges == ((0, 1),) and f.weight() == 9

    def test_unit_square_weight_three_sides(self):
        m = build_metric(points=[(0, 0), (1, 0), (1, 1), (0, 1)], coord_scale=1)
        assert mst_forest(m, [0, 1, 2, 3]).weight() == 3

    def test_restricted_vertex_set(self):
        m = line_metric([0, 1, 10])
        f = mst_forest(m, [0, 2])
        assert f.edges == ((0, 2),)

    def test_deterministic_on_ties(self):
        m = build_metric(matrix=[[0, 1, 1], [1, 0, 1], [1, 1, 0]])
        assert mst_forest(m, [0, 1, 2]).edges == mst_forest(m, [0, 1, 2]).edges


class TestSetPartitions:
    @pytest.mark.parametrize("n,bell", [(0, 1), (1, 1), (2, 2), (3, 5), (4, 15), (5, 52)])
    def test_counts_match_bell_numbers(self, n, bell):
        parts = list(set_partitions(n))
        assert len(parts) == bell
        # each partition covers 0..n-1 exactly once
        for p in parts:
            flat = sorted(x for g in p for x in g)
            assert flat == list(range(n))


class TestDemandBundles:
    def test_disjoint_pairs_stay_separate(self):
        m = line_metric(range(4))
        inst = SfpInstance.make(m, [(0, 1), (2, 3)], 1)
        assert sorted(demand_bundles(inst)) == [frozenset({0, 1}), frozenset({2, 3})]

    def test_shared_terminal_merges_bundles(self):
        m = line_metric(range(3))
        inst = SfpInstance.make(m, [(0, 1), (1, 2)], 1)
        assert demand_bundles(inst) == [frozenset({0, 1, 2})]

    def test_trivial_pairs_ignored(self):
        m = line_metric(range(3))
        inst = SfpInstance.make(m, [(1, 1)], 1)
        assert demand_bundles(inst) == []


class TestDreyfusWagner:
    def test_single_terminal_is_free(self):
        m = line_metric(range(3))
        cost, edges = dreyfus_wagner(m, [1], [])
        assert cost == 0 and edges == ()

    def test_two_terminals_direct_edge(self):
        m = line_metric([0, 4])
        cost, edges = dreyfus_wagner(m, [0, 1], [])
        assert cost == 4 and edges == ((0, 1),)

    def test_square_center_not_worth_using(self):
        # side 10: perimeter MST (30) beats the 4-spoke star (4 * 8 = 32)
        m = build_metric(
            points=[(0, 0), (10, 0), (10, 10), (0, 10), (5, 5)], coord_scale=1
        )
        cost, edges = dreyfus_wagner(m, [0, 1, 2, 3], [4])
        assert cost == 30
        assert 4 not in {v for e in edges for v in e}

    def test_hub_used_when_cheaper(self):
        # hub at (5, 3) gives a 3-spoke tree of 18 < terminal MST 21
        m = build_metric(points=[(0, 0), (10, 0), (5, 9), (5, 3)], coord_scale=1)
        cost, edges = dreyfus_wagner(m, [0, 1, 2], [3])
        assert cost == 18
        assert mst_forest(m, [0, 1, 2]).weight() == 21
        assert {v for e in edges for v in e} == {0, 1, 2, 3}

    def test_matches_terminal_mst_without_pool(self):
        rng = random.Random(17)
        for _ in range(10):
            n = rng.randint(2, 6)
            pts = [(rng.uniform(0, 40), rng.uniform(0, 40)) for _ in range(n)]
            m = build_metric(points=pts, coord_scale=10)
            cost, _ = dreyfus_wagner(m, list(range(n)), [])
            # with no Steiner pool the optimum over the terminal set is its MST
            assert cost == mst_forest(m, list(range(n))).weight()


class TestBruteForceOracle:
    def test_single_pair_cost_is_distance(self):
        m = line_metric([0, 6])
        inst = SfpInstance.make(m, [(0, 1)], 1)
        res = brute_force_forest(inst)
        assert res.cost == 6 and res.optimal

    def test_shared_terminal_steiner_tree(self):
        m = build_metric(points=[(0, 0), (10, 0), (5, 9)], coord_scale=1)
        inst = SfpInstance.make(m, [(0, 1), (1, 2)], 2)
        assert brute_force_forest(inst).cost == 21

    def test_steiner_point_exploited(self):
        m = build_metric(points=[(0, 0), (10, 0), (5, 9), (5, 3)], coord_scale=1)
        inst = SfpInstance.make(m, [(0, 1), (1, 2)], 2)
        res = brute_force_forest(inst)
        assert res.cost == 18
        assert 3 in {v for e in res.forest.edges for v in e}

    def test_split_into_two_trees_when_cheaper(self):
        m = line_metric([0, 1, 100, 101])
        inst = SfpInstance.make(m, [(0, 1), (2, 3)], 1)
        res = brute_force_forest(inst)
        assert res.cost == 2
        assert set(res.forest.edges) == {(0, 1), (2, 3)}

    def test_output_always_feasible(self):
        rng = random.Random(23)
        for _ in range(10):
            inst = _random_instance(rng, rng.randint(4, 9), rng.randint(1, 3))
            res = brute_force_forest(inst)
            assert is_feasible(res.forest.edges, inst)
            assert res.forest.weight() == res.cost

    def test_budget_rejects_oversized_instances(self):
        rng = random.Random(1)
        pts = [(rng.uniform(0, 50), rng.uniform(0, 50)) for _ in range(16)]
        m = build_metric(points=pts, coord_scale=10)
        inst = SfpInstance.make(m, [(2 * j, 2 * j + 1) for j in range(8)], 2)
        with pytest.raises(BudgetExceededError):
            brute_force_forest(inst, budget=OracleBudget(max_terminals=14))

    def test_agrees_with_independent_subset_mst(self):
        rng = random.Random(31)
        for _ in range(12):
            inst = _random_instance(rng, rng.randint(4, 10), rng.randint(1, 3))
            assert brute_force_forest(inst).cost == subset_mst_forest_cost(inst)

    def test_no_cheaper_edge_subset_exists(self):
        rng = random.Random(37)
        for _ in range(8):
            inst = _random_instance(rng, rng.randint(4, 7), rng.randint(1, 3))
            res = brute_force_forest(inst)
            assert no_cheaper_edge_subset(inst, res.cost)


class TestPrimalDual:
    def test_single_pair_is_exact(self):
        m = build_metric(points=[(0, 0), (3, 4)], coord_scale=1)
        inst = SfpInstance.make(m, [(0, 1)], 2)
        assert primal_dual_forest(inst).weight() == 5

    def test_duplicate_pairs_change_nothing(self):
        m = line_metric([0, 5, 9])
        one = SfpInstance.make(m, [(0, 2)], 1)
        two = SfpInstance.make(m, [(0, 2), (2, 0)], 1)
        assert primal_dual_forest(one).edges == primal_dual_forest(two).edges

    def test_always_feasible(self):
        rng = random.Random(41)
        for _ in range(15):
            inst = _random_instance(rng, rng.randint(4, 12), rng.randint(1, 4))
            f = primal_dual_forest(inst)
            assert is_feasible(f.edges, inst)

    def test_within_twice_optimal(self):
        rng = random.Random(43)
        for _ in range(15):
            inst = _random_instance(rng, rng.randint(4, 10), rng.randint(1, 3))
            opt = brute_force_forest(inst).cost
            got = primal_dual_forest(inst).weight()
            assert got <= 2 * opt + 1e-9

    def test_empty_demand_gives_empty_forest(self):
        m = line_metric(range(3))
        inst = SfpInstance.make(m, [(1, 1)], 1)
        assert primal_dual_forest(inst).edges == ()
