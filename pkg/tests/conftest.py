"""Shared fixtures and independent verifiers used across the test suite.

The verifiers here are deliberately written from scratch (plain loops,
union-find, itertools) so they share no code with the package internals they
check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import pytest

from sfp_ptas.cells import CellParams
from sfp_ptas.decomposition import (
    Decomposition,
    DecompositionParams,
    build_decomposition,
    make_portal_respecting,
)
from sfp_ptas.forest import Forest, make_net_respecting
from sfp_ptas.baselines import primal_dual_forest
from sfp_ptas.generators import GeneratorSpec, generate
from sfp_ptas.instance import SfpInstance
from sfp_ptas.metric import MetricSpace, NetHierarchy, build_hierarchy, build_metric


def line_metric(xs, coord_scale: int = 1) -> MetricSpace:
    """Metric of points on a line; integer coords + scale 1 keep ticks exact."""
    return build_metric(points=[(float(x),) for x in xs], coord_scale=coord_scale)


def connects_all(edges, pairs, n: int) -> bool:
    """Union-find feasibility check, independent of the package's version."""
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return all(find(a) == find(b) for a, b in pairs)


def no_cheaper_edge_subset(inst: SfpInstance, bound: int) -> bool:
    """Literal edge-subset search: True iff no feasible subset weighs < bound.

    A minimum-weight feasible subgraph is a forest, so subsets of more than
    n - 1 edges never need checking.  Practical up to ~8 points.
    """
    m = inst.metric
    n = m.n
    pairs = [p.as_tuple() for p in inst.demanding_pairs]
    if not pairs:
        return bound <= 0
    edges = [(m.dist(a, b), a, b) for a in range(n) for b in range(a + 1, n)]
    for size in range(1, n):
        for combo in itertools.combinations(edges, size):
            w = 0
            for e in combo:
                w += e[0]
                if w >= bound:
                    break
            if w >= bound:
                continue
            if connects_all([(a, b) for _, a, b in combo], pairs, n):
                return False
    return True


@dataclass
class PipelineRun:
    """One generated instance pushed through the concrete-solution pipeline."""

    inst: SfpInstance
    hier: NetHierarchy
    dec: Decomposition
    params: CellParams
    raw: Forest
    net_respecting: Forest
    portal_respecting: Forest


def build_pipeline_run(seed: int, kind: str = "euclidean2d", n_pairs: int = 3,
                       spread: int = 40, n_extra: int = 6) -> PipelineRun:
    spec = GeneratorSpec(kind=kind, n_pairs=n_pairs, spread=spread,
                         n_extra=n_extra, seed=seed)
    inst = generate(spec)
    hier = build_hierarchy(inst.metric, s=4)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 97)))
    dec = build_decomposition(
        inst.metric, hier, rng, DecompositionParams(dim_bound=inst.dim_bound)
    )
    params = CellParams.practical(4, num_levels=hier.num_levels)
    raw = primal_dual_forest(inst)
    nr = make_net_respecting(raw, hier, 0.5)
    pr = make_portal_respecting(nr, dec)
    return PipelineRun(inst, hier, dec, params, raw, nr, pr)


@pytest.fixture(scope="session")
def pipeline_runs() -> list[PipelineRun]:
    """A few shared end-to-end artifacts; building them is the slow part."""
    return [build_pipeline_run(seed) for seed in (3, 11, 27)]
