"""Randomized partitions, hierarchical decompositions, portals, lightness."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from conftest import line_metric
from sfp_ptas.baselines import primal_dual_forest
from sfp_ptas.decomposition import (
    DecompositionParams,
    build_decomposition,
    is_portal_respecting,
    lightness_report,
    make_portal_respecting,
    sample_height_radii,
    sample_radius_extra,
    single_scale_partition,
)
from sfp_ptas.errors import NotPortalRespectingError
from sfp_ptas.forest import Forest
from sfp_ptas.generators import GeneratorSpec, generate
from sfp_ptas.metric import build_hierarchy, build_metric


def _build(seed=0, n=14, spread=60, dim=2):
    rng = random.Random(seed)
    pts = [(rng.uniform(0, spread), rng.uniform(0, spread)) for _ in range(n)]
    m = build_metric(points=pts, coord_scale=100)
    hier = build_hierarchy(m, s=4)
    dec = build_decomposition(
        m, hier, np.random.default_rng(seed), DecompositionParams(dim_bound=dim)
    )
    return m, hier, dec


class TestRadiusSampling:
    def test_zero_quantile_gives_zero_extra(self):
        assert sample_radius_extra(16, 4, 0.0) == 0

    def test_top_quantile_clamps_below_scale(self):
        assert sample_radius_extra(16, 4, 0.999999) == 15

    def test_out_of_range_quantile_rejected(self):
        with pytest.raises(ValueError):
            sample_radius_extra(16, 4, 1.0)

    def test_all_samples_within_range(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            e = sample_radius_extra(64, 4, float(rng.random()))
            assert 0 <= e < 64

    def test_empirical_mean_matches_density(self):
        # compare the sampled mean against numeric quadrature of the
        # truncated exponential density on [0, S]
        S, chi, n = 10**6, 4, 100_000
        rng = np.random.default_rng(12)
        samples = np.array(
            [sample_radius_extra(S, chi, float(u)) for u in rng.random(n)],
            dtype=float,
        )
        t = np.linspace(0.0, S, 200_001)
        lam = math.log(chi) / S
        density = (chi / (chi - 1)) * lam * np.exp(-lam * t)
        trapz = getattr(np, "trapezoid", None) or np.trapz
        expected = trapz(t * density, t)
        assert abs(samples.mean() - expected) <= 0.01 * expected + 1.0

    def test_height_radii_cover_every_net_point(self):
        m = line_metric(range(20))
        hier = build_hierarchy(m, s=4)
        radii = sample_height_radii(hier, 1, np.random.default_rng(3), chi=4)
        assert set(radii) == set(hier.net(1))
        scale = hier.scale_ticks(1)
        assert all(scale <= r < 2 * scale for r in radii.values())


class TestSingleScalePartition:
    def test_single_net_point_claims_everything(self):
        m = line_metric([0, 1])
        hier = build_hierarchy(m, s=4)
        top = hier.num_levels - 1
        radii = {u: 2 * hier.scale_ticks(top) for u in hier.net(top)}
        part = single_scale_partition(m, hier, top, radii)
        assert set(part.values()) == {0}

    def test_tie_goes_to_earlier_net_point(self):
        # the point at coordinate 2 is exactly radius 2 from both net points
        m = line_metric([0, 1, 2, 4, 7, 8])
        hier = build_hierarchy(m, s=2)
        assert hier.net(1) == [0, 3, 4]
        radii = {0: 2, 3: 2, 4: 2}
        part = single_scale_partition(m, hier, 1, radii)
        assert part[2] == 0  # covered by the balls of both 0 and 3

    def test_uncovered_point_falls_back_to_nearest(self):
        m = line_metric([0, 1, 10, 11])
        hier = build_hierarchy(m, s=4)
        assert hier.net(1) == [0, 2]
        # zero-width balls leave the non-net points uncovered
        part = single_scale_partition(m, hier, 1, {0: 0, 2: 0})
        assert part == {0: 0, 1: 0, 2: 2, 3: 2}

    def test_every_point_assigned(self):
        m, hier, _ = _build(seed=5)
        radii = sample_height_radii(hier, 1, np.random.default_rng(8), chi=4)
        part = single_scale_partition(m, hier, 1, radii)
        assert set(part) == set(m.points())
        assert set(part.values()) <= set(hier.net(1))


class TestBuildDecomposition:
    def test_single_point_chain_of_singletons(self):
        m = build_metric(points=[(0.0, 0.0)])
        hier = build_hierarchy(m, s=4)
        dec = build_decomposition(
            m, hier, np.random.default_rng(0), DecompositionParams()
        )
        for h in range(dec.top_height + 1):
            cids = dec.height_clusters(h)
            assert len(cids) == 1
            assert dec.cluster(cids[0]).members == frozenset({0})

    def test_every_height_partitions_points(self):
        m, _, dec = _build(seed=1)
        all_points = set(m.points())
        for h in range(dec.top_height + 1):
            seen: set[int] = set()
            for cid in dec.height_clusters(h):
                members = dec.cluster(cid).members
                assert not (seen & members)
                seen |= members
            assert seen == all_points

    def test_children_partition_parent(self):
        _, _, dec = _build(seed=2)
        for c in dec.clusters:
            if c.height == 0:
                assert not c.children and len(c.members) == 1
                continue
            child_members = [dec.cluster(k).members for k in c.children]
            union = frozenset().union(*child_members)
            assert union == c.members
            assert sum(len(x) for x in child_members) == len(c.members)

    def test_members_within_twice_scale_of_center(self):
        m, hier, dec = _build(seed=3)
        for c in dec.clusters:
            if c.height >= dec.top_height:
                continue  # the root is the whole space by construction
            bound = 2 * hier.scale_ticks(c.height)
            assert all(m.dist(c.center, p) <= bound for p in c.members)

    def test_cluster_lookup_consistency(self):
        _, _, dec = _build(seed=4)
        for c in dec.clusters:
            for p in c.members:
                assert dec.cluster_at(p, c.height) == c.cid
                assert dec.is_descendant(c.cid, dec.root_id)

    def test_divergence_height(self):
        _, _, dec = _build(seed=4)
        assert dec.divergence_height(0, 0) == -1
        for a, b in [(0, 1), (2, 9)]:
            h = dec.divergence_height(a, b)
            assert dec.cluster_at(a, h) != dec.cluster_at(b, h)
            assert dec.cluster_at(a, h + 1) == dec.cluster_at(b, h + 1)

    def test_deterministic_given_seed(self):
        m, hier, _ = _build(seed=6)
        d1 = build_decomposition(m, hier, np.random.default_rng(42), DecompositionParams())
        d2 = build_decomposition(m, hier, np.random.default_rng(42), DecompositionParams())
        assert [(c.height, c.center, c.members) for c in d1.clusters] == [
            (c.height, c.center, c.members) for c in d2.clusters
        ]


class TestPortals:
    def test_singleton_cluster_is_its_own_portal(self):
        _, _, dec = _build(seed=7)
        for cid in dec.height_clusters(0):
            c = dec.cluster(cid)
            assert dec.portals(cid) == tuple(c.members)

    def test_portal_level_drop(self):
        _, _, dec = _build(seed=7)
        assert dec.portal_level(0) == 0
        assert dec.portal_level(1) == 0
        assert dec.portal_level(5) == 3

    def test_portals_are_members_on_the_net(self):
        _, hier, dec = _build(seed=8)
        for c in dec.clusters:
            ps = dec.portals(c.cid)
            assert ps, f"cluster {c.cid} has no portals"
            assert set(ps) <= c.members
            lvl = dec.portal_level(c.height)
            # the advertised level, or a finer one if the cluster is too
            # small to touch that net
            assert all(
                hier.in_net(p, lvl) or not any(hier.in_net(q, lvl) for q in c.members)
                for p in ps
            )

    def test_theory_mode_portal_level_defined(self):
        m, hier, _ = _build(seed=9)
        dec = build_decomposition(
            m,
            hier,
            np.random.default_rng(1),
            DecompositionParams(portal_mode="theory"),
        )
        for h in range(dec.top_height + 1):
            assert 0 <= dec.portal_level(h) <= max(0, h)


class TestPortalRespecting:
    def test_empty_forest_unchanged(self):
        m, _, dec = _build(seed=10)
        f = Forest.from_edges(m, [])
        assert make_portal_respecting(f, dec).edges == ()

    def test_rewrite_is_idempotent_and_checks_pass(self):
        spec = GeneratorSpec(kind="euclidean2d", n_pairs=3, spread=40, n_extra=5, seed=3)
        inst = generate(spec)
        hier = build_hierarchy(inst.metric, s=4)
        dec = build_decomposition(
            inst.metric, hier, np.random.default_rng(5),
            DecompositionParams(dim_bound=2),
        )
        raw = primal_dual_forest(inst)
        pr = make_portal_respecting(raw, dec)
        assert is_portal_respecting(pr, dec)
        again = make_portal_respecting(pr, dec)
        assert again.edges == pr.edges

    def test_connectivity_preserved(self):
        spec = GeneratorSpec(kind="clustered", n_pairs=3, spread=50, n_extra=6, seed=9)
        inst = generate(spec)
        hier = build_hierarchy(inst.metric, s=4)
        dec = build_decomposition(
            inst.metric, hier, np.random.default_rng(2),
            DecompositionParams(dim_bound=2),
        )
        raw = primal_dual_forest(inst)
        pr = make_portal_respecting(raw, dec)
        from sfp_ptas.instance import is_feasible

        assert is_feasible(pr.edges, inst)

    def test_rewrite_overhead_recorded(self, pipeline_runs):
        for run in pipeline_runs:
            raw_w = run.net_respecting.weight()
            pr_w = run.portal_respecting.weight()
            if raw_w:
                assert pr_w <= 3.0 * raw_w


class TestLightness:
    def test_empty_forest_all_zero(self):
        _, _, dec = _build(seed=11)
        rows = lightness_report(Forest.from_edges(dec.metric, []), dec)
        assert rows and all(
            r.crossing_edges == 0 and r.portals_used == 0 for r in rows
        )

    def test_counts_on_portal_respecting_solution(self, pipeline_runs):
        run = pipeline_runs[0]
        rows = lightness_report(run.portal_respecting, run.dec)
        by_cid = {r.cid: r for r in rows}
        assert set(by_cid) == {c.cid for c in run.dec.clusters}
        for r in rows:
            assert 0 <= r.portals_used <= r.portals_total
            assert r.crossing_components <= r.crossing_edges or r.crossing_edges == 0

    def test_rejects_non_respecting_forest(self):
        # an edge from a non-portal member of a big cluster to an outside
        # point crosses that cluster without touching any of its portals;
        # needs a hierarchy deep enough that portals sit on a sparse net
        _, _, dec = _build(seed=13, n=25, spread=400)
        bad = None
        for h in range(dec.top_height - 1, 1, -1):
            for cid in dec.height_clusters(h):
                c = dec.cluster(cid)
                inside = sorted(c.members - set(dec.portals(cid)))
                outside = sorted(set(dec.metric.points()) - c.members)
                if inside and outside:
                    bad = (inside[0], outside[0])
                    break
            if bad:
                break
        assert bad is not None, "fixture too small to host a violation"
        f = Forest.from_edges(dec.metric, [bad])
        assert not is_portal_respecting(f, dec)
        with pytest.raises(NotPortalRespectingError):
            lightness_report(f, dec)
