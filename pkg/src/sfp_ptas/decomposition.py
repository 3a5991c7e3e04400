"""Randomized hierarchical ball partitions of a net hierarchy, with portals.

Each height-i cut sweeps the level-i net points in ascending order of id;
every net point u claims the still-unclaimed points of the ball B(u, r_u),
where r_u is s^i plus a truncated-exponential extra sampled so that the
probability a fixed pair is separated at height i is proportional to its
distance over s^i.  Points missed by every ball (possible because nets at
level i are drawn from level i-1, which relaxes the cover radius) fall back
to their nearest net point.  The top cluster is the whole space; height-0
clusters are singletons.

Portals of a cluster are its members that belong to a net a couple of levels
finer than the cluster's own height (spilling further down when the cluster
is so small that no member reaches that net).  ``make_portal_respecting``
reroutes arbitrary edges through portals without ever leaving the clusters
involved, which keeps the rewrite provably terminating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import NotPortalRespectingError
from .forest import Forest, components
from .metric import MetricSpace, NetHierarchy, floor_log_scale


@dataclass(frozen=True)
class DecompositionParams:
    dim_bound: int = 2
    portal_drop: int = 2
    portal_mode: str = "practical"  # "practical" | "theory"
    eps: float = 0.5

    @property
    def chi(self) -> int:
        return 2 ** max(1, self.dim_bound)


def sample_radius_extra(scale_ticks: int, chi: int, u01: float) -> int:
    """Extra radius in [0, scale_ticks) from the truncated exponential with
    density proportional to chi^(-x/scale); sampled by inverting the CDF."""
    if not 0 <= u01 < 1:
        raise ValueError("u01 must lie in [0, 1)")
    x = -math.log(1.0 - u01 * (chi - 1) / chi) / math.log(chi)
    extra = int(math.floor(scale_ticks * x))
    return min(max(extra, 0), scale_ticks - 1)


def sample_height_radii(
    hier: NetHierarchy, i: int, rng: np.random.Generator, chi: int
) -> dict[int, int]:
    """Ball radii (ticks) for every level-i net point, in ascending id order."""
    scale = hier.scale_ticks(i)
    return {u: scale + sample_radius_extra(scale, chi, float(rng.random())) for u in hier.net(i)}


def single_scale_partition(
    metric: MetricSpace,
    hier: NetHierarchy,
    i: int,
    radii: dict[int, int],
) -> dict[int, int]:
    """Assign every point to the first net point (ascending id) whose ball
    contains it, falling back to the nearest net point when no ball does."""
    centers = hier.net(i)
    out: dict[int, int] = {}
    for p in metric.points():
        owner = None
        for u in centers:
            if metric.dist(p, u) <= radii[u]:
                owner = u
                break
        if owner is None:
            owner = metric.nearest(p, centers)
        out[p] = owner
    return out


@dataclass
class Cluster:
    cid: int
    height: int
    center: int
    members: frozenset[int]
    parent: int | None
    children: tuple[int, ...] = ()


class Decomposition:
    """A laminar family of clusters: one root covering everything, singleton
    leaves at height 0, and one partition refinement per height between."""

    def __init__(
        self,
        metric: MetricSpace,
        hier: NetHierarchy,
        clusters: list[Cluster],
        radii_by_height: dict[int, dict[int, int]],
        params: DecompositionParams,
    ):
        self.metric = metric
        self.hier = hier
        self.clusters = clusters
        self.radii_by_height = radii_by_height
        self.params = params
        self.root_id = 0
        self.top_height = clusters[0].height
        self._by_height: dict[int, list[int]] = {}
        for c in clusters:
            self._by_height.setdefault(c.height, []).append(c.cid)
        # cluster containing each point at each height
        self._at = np.full((metric.n, self.top_height + 1), -1, dtype=np.int64)
        for c in clusters:
            for p in c.members:
                self._at[p, c.height] = c.cid
        assert (self._at >= 0).all(), "every point must be covered at every height"
        self._portal_cache: dict[int, tuple[int, ...]] = {}

    def cluster(self, cid: int) -> Cluster:
        return self.clusters[cid]

    def height_clusters(self, h: int) -> list[int]:
        return sorted(self._by_height.get(h, []))

    def cluster_at(self, p: int, h: int) -> int:
        return int(self._at[p, min(h, self.top_height)])

    def children(self, cid: int) -> tuple[int, ...]:
        return self.clusters[cid].children

    def divergence_height(self, a: int, b: int) -> int:
        """Largest height at which a and b sit in different clusters (-1 if
        that never happens, i.e. a == b)."""
        h = self.top_height
        while h >= 0 and self.cluster_at(a, h) == self.cluster_at(b, h):
            h -= 1
        return h

    def is_descendant(self, cid: int, ancestor: int) -> bool:
        cur: int | None = cid
        while cur is not None:
            if cur == ancestor:
                return True
            cur = self.clusters[cur].parent
        return False

    def portal_level(self, height: int) -> int:
        p = self.params
        if height <= 0:
            return 0
        if p.portal_mode == "theory":
            # finest level whose scale still dominates eps/(4*beta*L) of the
            # cluster scale, with beta = 2k standing in for the O(k) cut bound
            beta = 2 * max(1, p.dim_bound)
            target = Fraction(p.eps) * Fraction(self.hier.s) ** height / (4 * beta * self.hier.num_levels)
            lvl = floor_log_scale(target, self.hier.s) if target >= 1 else 0
            return max(0, min(height, lvl))
        return max(0, height - p.portal_drop)

    def portals(self, cid: int) -> tuple[int, ...]:
        """Members of the cluster lying on the net at the cluster's portal
        level, spilling to finer nets until some member qualifies (level 0 is
        all points, so the result is never empty)."""
        if cid in self._portal_cache:
            return self._portal_cache[cid]
        c = self.clusters[cid]
        lvl = self.portal_level(c.height)
        while lvl > 0 and not any(self.hier.in_net(p, lvl) for p in c.members):
            lvl -= 1
        out = tuple(sorted(p for p in c.members if self.hier.in_net(p, lvl)))
        self._portal_cache[cid] = out
        return out

    def net_anchor(self, cid: int) -> int:
        """The member on the coarsest net (ties: smallest id); it is a portal
        of this cluster and of every descendant cluster containing it."""
        c = self.clusters[cid]
        return max(c.members, key=lambda p: (self.hier.level_of[p], -p))


def build_decomposition(
    metric: MetricSpace,
    hier: NetHierarchy,
    rng: np.random.Generator,
    params: DecompositionParams,
) -> Decomposition:
    top = hier.num_levels - 1
    radii_by_height: dict[int, dict[int, int]] = {}
    partitions: dict[int, dict[int, int]] = {}
    for i in range(top - 1, 0, -1):
        radii = sample_height_radii(hier, i, rng, params.chi)
        radii_by_height[i] = radii
        partitions[i] = single_scale_partition(metric, hier, i, radii)

    clusters: list[Cluster] = []
    root = Cluster(
        cid=0,
        height=top,
        center=hier.net(top)[0],
        members=frozenset(metric.points()),
        parent=None,
    )
    clusters.append(root)
    frontier = [0]
    for h in range(top - 1, -1, -1):
        next_frontier: list[int] = []
        for pid in frontier:
            parent = clusters[pid]
            groups: dict[int, list[int]] = {}
            if h == 0:
                for p in sorted(parent.members):
                    groups[p] = [p]
            else:
                for p in sorted(parent.members):
                    groups.setdefault(partitions[h][p], []).append(p)
            kids = []
            for center in sorted(groups):
                cid = len(clusters)
                clusters.append(
                    Cluster(
                        cid=cid,
                        height=h,
                        center=center,
                        members=frozenset(groups[center]),
                        parent=pid,
                    )
                )
                kids.append(cid)
            clusters[pid].children = tuple(kids)
            next_frontier.extend(kids)
        frontier = next_frontier
    return Decomposition(metric, hier, clusters, radii_by_height, params)


def _edge_crossings_ok(dec: Decomposition, a: int, b: int) -> bool:
    t = dec.divergence_height(a, b)
    for m in range(0, t + 1):
        if a not in dec.portals(dec.cluster_at(a, m)):
            return False
        if b not in dec.portals(dec.cluster_at(b, m)):
            return False
    return True


def is_portal_respecting(forest: Forest, dec: Decomposition) -> bool:
    return all(_edge_crossings_ok(dec, a, b) for a, b in forest.edges)


def make_portal_respecting(forest: Forest, dec: Decomposition) -> Forest:
    """Reroute every edge so each cluster is entered/left only at portals.

    An edge diverging at height t is replaced by a bridge between the net
    anchors of the two height-t clusters (anchors are portals of every
    cluster below the divergence, so the bridge is always legal) plus two
    recursive connections that stay inside their height-t clusters and hence
    diverge strictly lower.
    """
    out: set[tuple[int, int]] = set()

    def connect(a: int, b: int) -> None:
        if a == b:
            return
        if _edge_crossings_ok(dec, a, b):
            out.add((min(a, b), max(a, b)))
            return
        t = dec.divergence_height(a, b)
        assert t >= 1, "height-0 crossings are always portal-legal"
        wa = dec.net_anchor(dec.cluster_at(a, t))
        wb = dec.net_anchor(dec.cluster_at(b, t))
        if wa != wb:
            out.add((min(wa, wb), max(wa, wb)))
        connect(a, wa)
        connect(wb, b)

    for a, b in forest.edges:
        connect(a, b)
    result = Forest(metric=forest.metric, edges=tuple(sorted(out)))
    if not is_portal_respecting(result, dec):
        raise NotPortalRespectingError("portal rewrite produced an illegal edge")
    return result


@dataclass
class ClusterLightness:
    cid: int
    height: int
    crossing_edges: int
    crossing_components: int
    portals_total: int
    portals_used: int


def lightness_report(forest: Forest, dec: Decomposition) -> list[ClusterLightness]:
    """Per-cluster crossing statistics for a (portal-respecting) forest."""
    comps = components(forest)
    out = []
    for c in dec.clusters:
        crossing = [
            (a, b)
            for a, b in forest.edges
            if (a in c.members) != (b in c.members)
        ]
        used = {p for e in crossing for p in e if p in c.members}
        n_cross_comp = sum(
            1
            for comp in comps
            if any(v in c.members for v in comp) and any(v not in c.members for v in comp)
        )
        out.append(
            ClusterLightness(
                cid=c.cid,
                height=c.height,
                crossing_edges=len(crossing),
                crossing_components=n_cross_comp,
                portals_total=len(dec.portals(c.cid)),
                portals_used=len(used),
            )
        )
    return out
