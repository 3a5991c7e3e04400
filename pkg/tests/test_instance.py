"""Terminal pairs, ball sub-instances, critical splits, feasibility."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from conftest import line_metric
from sfp_ptas.baselines import primal_dual_forest
from sfp_ptas.instance import (
    BallParams,
    SfpInstance,
    TerminalPair,
    auxiliary_subinstance,
    is_feasible,
    split_critical,
)
from sfp_ptas.metric import build_hierarchy, build_metric


def _pairs(inst):
    return sorted(p.as_tuple() for p in inst.pairs)


class TestTerminalPair:
    def test_endpoints_normalized(self):
        assert TerminalPair(5, 2).as_tuple() == (2, 5)

    def test_self_pair_is_trivial(self):
        assert TerminalPair(3, 3).trivial
        assert not TerminalPair(3, 4).trivial

    def test_instance_deduplicates_unordered_pairs(self):
        m = line_metric(range(4))
        inst = SfpInstance.make(m, [(0, 1), (1, 0), (0, 1)], 1)
        assert _pairs(inst) == [(0, 1)]

    def test_out_of_range_pair_rejected(self):
        m = line_metric(range(3))
        with pytest.raises(ValueError):
            SfpInstance.make(m, [(0, 7)], 1)

    def test_demanding_pairs_drop_trivial(self):
        m = line_metric(range(3))
        inst = SfpInstance.make(m, [(1, 1), (0, 2)], 1)
        assert [p.as_tuple() for p in inst.demanding_pairs] == [(0, 2)]


class TestAuxiliarySubinstance:
    # Line 0..40, s=4: scale_ticks(1) = 4.  With i=1, t=1, delta=1/2 the
    # ball around 0 has radius 4 and slack radius 6; the snapping net for
    # delta * s^1 = 2 is N_0 (level 0 covers every point).
    def setup_method(self):
        self.m = line_metric(range(41))
        self.hier = build_hierarchy(self.m, s=4)
        self.params = BallParams(delta=Fraction(1, 2))

    def aux(self, pairs, t=1, u=0, i=1):
        inst = SfpInstance.make(self.m, pairs, 1)
        return auxiliary_subinstance(inst, self.hier, i=i, u=u, t=t, params=self.params)

    def test_pair_inside_ball_kept(self):
        assert _pairs(self.aux([(0, 3)])) == [(0, 3)]

    def test_partner_within_slack_kept_whole(self):
        # 5 is outside radius 4 but within the slack radius 6
        assert _pairs(self.aux([(2, 5)])) == [(2, 5)]

    def test_partner_beyond_slack_becomes_local_standin(self):
        # the stand-in partner is the nearest snapping-net point to the
        # INSIDE endpoint; at level 0 that is the endpoint itself
        sub = self.aux([(1, 30)])
        assert _pairs(sub) == [(1, 1)]
        assert not sub.demanding_pairs

    def test_both_endpoints_outside_dropped(self):
        assert _pairs(self.aux([(10, 38)])) == []

    def test_both_in_slack_annulus_dropped(self):
        # neither endpoint is inside the ball proper, so the pair is dropped
        # even though both sit within the slack radius
        assert _pairs(self.aux([(5, 6)])) == []

    def test_far_pairs_only_gives_empty_subinstance(self):
        assert _pairs(self.aux([(20, 40), (25, 30)])) == []

    def test_nontrivial_standin_snaps_inside_endpoint(self):
        # i=2: ball radius 16, slack 16 + 8 = 24; delta * s^2 = 8 puts the
        # snapping net at level 1, so endpoint 1 snaps to net point 0
        sub = self.aux([(1, 30)], i=2)
        assert self.m.nearest(1, self.hier.net(1)) == 0
        assert _pairs(sub) == [(0, 1)]

    def test_membership_monotone_in_radius_factor(self):
        rng = random.Random(4)
        inst = SfpInstance.make(
            self.m, [(rng.randrange(41), rng.randrange(41)) for _ in range(8)], 1
        )
        small = auxiliary_subinstance(inst, self.hier, 1, 20, 1, self.params)
        large = auxiliary_subinstance(inst, self.hier, 1, 20, 3, self.params)
        # any original pair kept whole at t=1 is kept whole at t=3
        kept_small = set(_pairs(small)) & {p.as_tuple() for p in inst.pairs}
        kept_large = set(_pairs(large)) & {p.as_tuple() for p in inst.pairs}
        assert kept_small <= kept_large


class TestSplitCritical:
    # Line 0..120, s=4, ball at level 2: cut = (4 + 2*lam + shift) * 16,
    # slack = cut + delta * 16 = cut + 8, snapping net N_1 = {0, 5, 10, ...}.
    def setup_method(self):
        self.m = line_metric(range(121))
        self.hier = build_hierarchy(self.m, s=4)
        self.params = BallParams(delta=Fraction(1, 2))

    def split(self, pairs, u=0, lam=0, shift=0.0, i=2):
        inst = SfpInstance.make(self.m, pairs, 1)
        return split_critical(inst, self.hier, i, u, lam, shift, self.params)

    def test_everything_inside_goes_inner(self):
        sp = self.split([(0, 3), (2, 60)])
        assert _pairs(sp.inner) == [(0, 3), (2, 60)]
        assert _pairs(sp.outer) == []

    def test_everything_outside_goes_outer(self):
        sp = self.split([(70, 120), (80, 95)])
        assert _pairs(sp.inner) == []
        assert _pairs(sp.outer) == [(70, 120), (80, 95)]

    def test_partner_in_slack_stays_inner_whole(self):
        # 70 is beyond the cut (64) but within cut + 8 = 72
        sp = self.split([(5, 70)])
        assert _pairs(sp.inner) == [(5, 70)]
        assert _pairs(sp.outer) == []

    def test_straddling_pair_bridged_on_both_sides(self):
        # 1 inside, 100 beyond the slack radius: both halves reference the
        # bridging net point nearest to the inside endpoint
        sp = self.split([(1, 100)])
        bridge = self.m.nearest(1, self.hier.net(1))
        assert bridge == 0
        assert _pairs(sp.inner) == [(0, 1)]
        assert _pairs(sp.outer) == [(0, 100)]

    def test_cut_radius_and_snap_level_reported(self):
        sp = self.split([(0, 1)], lam=1, shift=0.5)
        assert sp.cut_radius == Fraction(4 + 2 + Fraction(1, 2)) * 16
        assert sp.snap_level == 1

    def test_sides_match_case_analysis(self):
        # independent re-derivation of the three cases over random pairs
        rng = random.Random(9)
        u = 60
        pairs = [(rng.randrange(121), rng.randrange(121)) for _ in range(14)]
        inst = SfpInstance.make(self.m, pairs, 1)
        sp = split_critical(inst, self.hier, 2, u, 0, 0.25, self.params)
        cut = sp.cut_radius
        slack = cut + 8
        net = self.hier.net(sp.snap_level)
        exp_inner, exp_outer = set(), set()
        for p in inst.pairs:
            da, db = self.m.dist(u, p.a), self.m.dist(u, p.b)
            ina, inb = da <= cut, db <= cut
            if ina and inb:
                exp_inner.add(p.as_tuple())
            elif ina or inb:
                kept, rest = (p.a, p.b) if ina else (p.b, p.a)
                if max(da, db) <= slack:
                    exp_inner.add(p.as_tuple())
                else:
                    bridge = self.m.nearest(kept, net)
                    exp_inner.add(tuple(sorted((kept, bridge))))
                    exp_outer.add(tuple(sorted((bridge, rest))))
            else:
                exp_outer.add(p.as_tuple())
        assert set(_pairs(sp.inner)) == exp_inner
        assert set(_pairs(sp.outer)) == exp_outer

    def test_union_of_side_solutions_feasible_for_original(self):
        rng = random.Random(7)
        checked = 0
        for trial in range(12):
            n = rng.randint(6, 12)
            pts = [(rng.uniform(0, 60), rng.uniform(0, 60)) for _ in range(n)]
            m = build_metric(points=pts, coord_scale=10)
            hier = build_hierarchy(m, s=4)
            ids = list(range(n))
            rng.shuffle(ids)
            inst = SfpInstance.make(
                m, [(ids[2 * j], ids[2 * j + 1]) for j in range(n // 3)], 2
            )
            params = BallParams(delta=Fraction(1, rng.choice([2, 4])))
            for _ in range(4):
                i = rng.randint(1, max(1, hier.num_levels - 1))
                sp = split_critical(
                    inst, hier, i, rng.randrange(n), rng.randint(0, 2),
                    rng.random() * 0.5, params,
                )
                f1 = primal_dual_forest(sp.inner)
                f2 = primal_dual_forest(sp.outer)
                assert is_feasible(list(f1.edges) + list(f2.edges), inst)
                checked += 1
        assert checked == 48


class TestIsFeasible:
    def test_trivial_pair_always_satisfied(self):
        m = line_metric(range(3))
        inst = SfpInstance.make(m, [(1, 1)], 1)
        assert is_feasible([], inst)

    def test_disconnected_pair_infeasible(self):
        m = line_metric(range(3))
        inst = SfpInstance.make(m, [(0, 2)], 1)
        assert not is_feasible([], inst)
        assert not is_feasible([(0, 1)], inst)

    def test_star_connects_everything(self):
        m = line_metric(range(5))
        inst = SfpInstance.make(m, [(1, 2), (3, 4)], 1)
        assert is_feasible([(0, 1), (0, 2), (0, 3), (0, 4)], inst)

    def test_indirect_paths_count(self):
        m = line_metric(range(4))
        inst = SfpInstance.make(m, [(0, 3)], 1)
        assert is_feasible([(0, 1), (1, 2), (2, 3)], inst)


class TestBallParams:
    def test_delta_must_be_a_proper_fraction(self):
        with pytest.raises(ValueError):
            BallParams(delta=Fraction(0))
        with pytest.raises(ValueError):
            BallParams(delta=Fraction(1))

    def test_from_eps_formula(self):
        p = BallParams.from_eps(0.5, 2)
        assert p.delta == Fraction(1, 2) / 16
