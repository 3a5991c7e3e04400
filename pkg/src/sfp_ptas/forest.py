"""Forests over a metric space: weights, components, and edge normalizations.

The two structural operations here mirror what the solver needs from a
candidate solution: ``make_net_respecting`` rewrites every edge so that its
endpoints are net points at a level matched to the edge length, and
``find_longest_steiner_chain`` locates the heaviest run of pure Steiner
points, which is what the sparsity heuristic measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import NotATreeError, PreconditionUnverifiable
from .metric import MetricSpace, NetHierarchy, floor_log_scale


def _norm_edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Forest:
    """An edge set over a MetricSpace; self-loops are dropped, edges deduped."""

    metric: MetricSpace
    edges: tuple[tuple[int, int], ...]

    @staticmethod
    def from_edges(metric: MetricSpace, edges: Iterable[tuple[int, int]]) -> "Forest":
        uniq = {_norm_edge(int(a), int(b)) for a, b in edges if int(a) != int(b)}
        return Forest(metric=metric, edges=tuple(sorted(uniq)))

    def weight(self) -> int:
        return sum(self.metric.dist(a, b) for a, b in self.edges)

    def vertices(self) -> tuple[int, ...]:
        return tuple(sorted({v for e in self.edges for v in e}))

    def with_edges(self, extra: Iterable[tuple[int, int]]) -> "Forest":
        return Forest.from_edges(self.metric, list(self.edges) + list(extra))

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {}
        for a, b in self.edges:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        for v in adj:
            adj[v].sort()
        return adj

    def __len__(self) -> int:
        return len(self.edges)


def components(forest: Forest) -> list[frozenset[int]]:
    """Connected components of the forest's edge-induced vertex set,
    sorted by smallest member."""
    adj = forest.adjacency()
    seen: set[int] = set()
    out: list[frozenset[int]] = []
    for v in sorted(adj):
        if v in seen:
            continue
        stack, comp = [v], set()
        while stack:
            x = stack.pop()
            if x in comp:
                continue
            comp.add(x)
            stack.extend(y for y in adj[x] if y not in comp)
        seen |= comp
        out.append(frozenset(comp))
    return sorted(out, key=min)


def component_edges(forest: Forest, comp: frozenset[int]) -> tuple[tuple[int, int], ...]:
    return tuple(e for e in forest.edges if e[0] in comp)


def crossing_components(forest: Forest, member: Sequence[bool]) -> list[frozenset[int]]:
    """Components with at least one vertex inside the flagged set and one outside."""
    out = []
    for comp in components(forest):
        ins = any(member[v] for v in comp)
        outs = any(not member[v] for v in comp)
        if ins and outs:
            out.append(comp)
    return out


def _edge_level(d_ticks: int, unit: int, e_nr: Fraction, s: int) -> int:
    """The level i with s^i <= e_nr * d < s^(i+1), clamped at 0."""
    target = e_nr * Fraction(d_ticks, unit)
    if target < 1:
        return 0
    return floor_log_scale(target, s)


def make_net_respecting(forest: Forest, hier: NetHierarchy, e_nr: float) -> Forest:
    """Rewrite each edge into a path whose pieces all have both endpoints in
    the net whose scale matches the piece length (scaled by ``e_nr``).

    Each offending edge (x, y) is replaced by x -> x' -> y' -> y where x', y'
    are the nearest net points at the required level; the outer stubs are
    shorter than the original edge and are reprocessed.  Total weight grows by
    at most an O(e_nr * s) factor.  ``e_nr`` must be in (0, 1].
    """
    eps = Fraction(e_nr)
    if not 0 < eps <= 1:
        raise ValueError("net-respecting slack must be in (0, 1]")
    m, s, unit = forest.metric, hier.s, forest.metric.unit
    out: set[tuple[int, int]] = set()
    budget = 16 * (hier.num_levels + 2) * (len(forest.edges) + 1)
    stack: list[tuple[int, int]] = [e for e in reversed(forest.edges)]
    while stack:
        budget -= 1
        if budget < 0:
            raise AssertionError("net-respecting rewrite failed to terminate")
        x, y = stack.pop()
        if x == y:
            continue
        d = m.dist(x, y)
        lvl = min(_edge_level(d, unit, eps, s), hier.top)
        if hier.in_net(x, lvl) and hier.in_net(y, lvl):
            out.add(_norm_edge(x, y))
            continue
        nx = m.nearest(x, hier.net(lvl))
        ny = m.nearest(y, hier.net(lvl))
        if nx != x:
            stack.append((x, nx))
        if ny != y:
            stack.append((ny, y))
        if nx != ny:
            stack.append((nx, ny))
    return Forest(metric=m, edges=tuple(sorted(out)))


def is_net_respecting(forest: Forest, hier: NetHierarchy, e_nr: float) -> bool:
    eps = Fraction(e_nr)
    for x, y in forest.edges:
        lvl = min(_edge_level(forest.metric.dist(x, y), forest.metric.unit, eps, hier.s), hier.top)
        if not (hier.in_net(x, lvl) and hier.in_net(y, lvl)):
            return False
    return True


@dataclass(frozen=True)
class SteinerChain:
    vertices: tuple[int, ...]
    weight: int

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.vertices[0], self.vertices[-1])


def _check_tree(forest: Forest) -> None:
    verts = forest.vertices()
    if not verts:
        return
    comps = components(forest)
    if len(comps) != 1 or len(forest.edges) != len(verts) - 1:
        raise NotATreeError("expected a single acyclic connected component")


def find_longest_steiner_chain(forest: Forest, terminals: Iterable[int]) -> SteinerChain | None:
    """Heaviest maximal path whose interior vertices are all degree-2
    non-terminals.  Returns None for an edgeless tree.  The input must be a
    single tree.  Ties are broken by the lexicographically smallest vertex
    sequence, so the result is deterministic.
    """
    _check_tree(forest)
    if not forest.edges:
        return None
    term = set(terminals)
    adj = forest.adjacency()
    # Degree-1 path ends always qualify, so a tree with edges has joints.
    joints = {v for v in adj if v in term or len(adj[v]) != 2}
    best_weight = -1
    best_path: tuple[int, ...] | None = None
    seen_edges: set[tuple[int, int]] = set()
    for start in sorted(joints):
        for nxt in adj[start]:
            if _norm_edge(start, nxt) in seen_edges:
                continue
            path = [start, nxt]
            while path[-1] not in joints:
                prev, cur = path[-2], path[-1]
                path.append(next(w for w in adj[cur] if w != prev))
            for a, b in zip(path, path[1:]):
                seen_edges.add(_norm_edge(a, b))
            weight = sum(forest.metric.dist(a, b) for a, b in zip(path, path[1:]))
            canon = min(tuple(path), tuple(reversed(path)))
            if weight > best_weight or (weight == best_weight and (best_path is None or canon < best_path)):
                best_weight, best_path = weight, canon
    assert best_path is not None
    return SteinerChain(vertices=best_path, weight=best_weight)


@dataclass
class ProximityReport:
    ok: bool
    bound_ticks: Fraction
    worst_ticks: int
    worst_vertex: int | None


def steiner_proximity_check(
    tree: Forest,
    terminals: Iterable[int],
    gamma: float,
    dim_bound: int,
    assume_optimal: bool = False,
) -> ProximityReport:
    """Check that every Steiner point of ``tree`` lies within
    4 * k * gamma * log2(4/gamma) * diam(terminals) of some terminal.

    The bound only holds for trees that are optimal (or near-optimal) for
    their terminal set, which cannot be verified cheaply here; callers must
    pass ``assume_optimal=True`` to vouch for it.
    """
    if not assume_optimal:
        raise PreconditionUnverifiable(
            "proximity bound requires an (assumed) optimal tree; pass assume_optimal=True"
        )
    term = sorted(set(terminals))
    if not term:
        raise ValueError("need at least one terminal")
    g = Fraction(gamma)
    if not 0 < g <= 1:
        raise ValueError("gamma must be in (0, 1]")
    m = tree.metric
    diam = max((m.dist(a, b) for a in term for b in term), default=0)
    bound = 4 * max(1, dim_bound) * g * Fraction(math.log2(4 / float(g))) * diam
    worst, worst_v = -1, None
    for v in tree.vertices():
        if v in set(term):
            continue
        d = min(m.dist(v, t) for t in term)
        if d > worst:
            worst, worst_v = d, v
    ok = worst <= bound
    return ProximityReport(ok=ok, bound_ticks=bound, worst_ticks=worst, worst_vertex=worst_v)
