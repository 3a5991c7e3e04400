"""Steiner forest instances and the ball-based sub-instances used by the solver.

An instance is a set of unordered terminal pairs over a MetricSpace together
with a doubling-dimension bound.  The two derived-instance constructions here
(``auxiliary_subinstance`` and ``split_critical``) restrict an instance to the
neighborhood of a net point at some scale: the first feeds the sparsity
heuristic, the second cuts a dense instance into an inner and an outer part
along a randomly shifted annulus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import EmptyInstanceError
from .metric import MetricSpace, NetHierarchy


@dataclass(frozen=True, order=True)
class TerminalPair:
    a: int
    b: int

    def __post_init__(self):
        if self.a > self.b:
            lo, hi = self.b, self.a
            object.__setattr__(self, "a", lo)
            object.__setattr__(self, "b", hi)

    @property
    def trivial(self) -> bool:
        return self.a == self.b

    def as_tuple(self) -> tuple[int, int]:
        return (self.a, self.b)


def _normalize_pairs(pairs: Iterable[tuple[int, int] | TerminalPair]) -> tuple[TerminalPair, ...]:
    out: list[TerminalPair] = []
    seen: set[tuple[int, int]] = set()
    for p in pairs:
        tp = p if isinstance(p, TerminalPair) else TerminalPair(int(p[0]), int(p[1]))
        if tp.as_tuple() not in seen:
            seen.add(tp.as_tuple())
            out.append(tp)
    return tuple(sorted(out))


@dataclass(frozen=True)
class SfpInstance:
    """Terminal pairs over a shared metric, plus a doubling dimension bound."""

    metric: MetricSpace
    pairs: tuple[TerminalPair, ...]
    dim_bound: int

    @staticmethod
    def make(metric: MetricSpace, pairs: Iterable, dim_bound: int) -> "SfpInstance":
        norm = _normalize_pairs(pairs)
        for tp in norm:
            if not (0 <= tp.a < metric.n and 0 <= tp.b < metric.n):
                raise ValueError(f"terminal pair {tp.as_tuple()} out of range")
        return SfpInstance(metric=metric, pairs=norm, dim_bound=int(dim_bound))

    @property
    def terminals(self) -> tuple[int, ...]:
        pts = {t for p in self.pairs for t in (p.a, p.b)}
        return tuple(sorted(pts))

    @property
    def demanding_pairs(self) -> tuple[TerminalPair, ...]:
        """Pairs whose endpoints actually differ."""
        return tuple(p for p in self.pairs if not p.trivial)

    def with_pairs(self, pairs: Iterable) -> "SfpInstance":
        return SfpInstance(metric=self.metric, pairs=_normalize_pairs(pairs), dim_bound=self.dim_bound)

    def restrict(self, member: Sequence[bool]) -> "SfpInstance":
        """Keep only pairs with both endpoints flagged in ``member``."""
        kept = [p for p in self.pairs if member[p.a] and member[p.b]]
        return self.with_pairs(kept)


@dataclass(frozen=True)
class BallParams:
    """Shared knobs for the ball sub-instance constructions.

    ``delta`` is the snapping slack, a fraction of the ball scale; the default
    elsewhere in the pipeline is eps/(8k).  Thresholds are compared exactly as
    Fractions of a unit.
    """

    delta: Fraction

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @staticmethod
    def from_eps(eps: float, dim_bound: int) -> "BallParams":
        k = max(1, int(dim_bound))
        return BallParams(delta=Fraction(eps) / (8 * k))


def _snap_level_strict(delta_scale: Fraction, s: int) -> int:
    """Largest j >= 0 with s^j strictly below delta_scale (clamped at 0).

    This is the level whose net is fine enough that snapping onto it moves a
    point by less than delta_scale units.
    """
    j = -1
    while Fraction(s) ** (j + 1) < delta_scale:
        j += 1
    return max(0, j)


def _snap_level_weak(delta_scale: Fraction, s: int) -> int:
    """Largest j >= 0 with s^j <= delta_scale (clamped at 0)."""
    j = -1
    while Fraction(s) ** (j + 1) <= delta_scale:
        j += 1
    return max(0, j)


def auxiliary_subinstance(
    inst: SfpInstance,
    hier: NetHierarchy,
    i: int,
    u: int,
    t: int,
    params: BallParams,
) -> SfpInstance:
    """Sub-instance capturing the demand crossing the ball B(u, t * s^i).

    Per pair: both endpoints in the ball -- or one inside and the partner
    within the (t + delta) * s^i slack -- keep the pair as is; one endpoint
    inside with the partner beyond the slack radius turns into the local
    stand-in demand (a, a') where a' is the inside endpoint's nearest net
    point at the snap level for delta * s^i (nets at negative levels mean
    "every point", hence the clamp to level 0); neither endpoint inside
    drops the pair.
    """
    m = inst.metric
    unit = m.unit
    inner = Fraction(t) * hier.scale_ticks(i)
    outer = inner + params.delta * (hier.s**i) * unit
    j = _snap_level_strict(params.delta * Fraction(hier.s) ** i, hier.s)
    net_j = hier.net(j)
    out: list[TerminalPair] = []
    for p in inst.pairs:
        da, db = m.dist(u, p.a), m.dist(u, p.b)
        a_in, b_in = da <= inner, db <= inner
        if a_in and b_in:
            out.append(p)
        elif a_in or b_in:
            near, far = (p.a, p.b) if a_in else (p.b, p.a)
            dfar = db if a_in else da
            if dfar <= outer:
                out.append(p)
            else:
                out.append(TerminalPair(near, m.nearest(near, net_j)))
        # neither endpoint inside the ball: the pair is not this ball's business
    return inst.with_pairs(out)


@dataclass(frozen=True)
class CriticalSplit:
    inner: SfpInstance
    outer: SfpInstance
    cut_radius: Fraction
    snap_level: int


def split_critical(
    inst: SfpInstance,
    hier: NetHierarchy,
    i: int,
    u: int,
    lam: int,
    shift: float,
    params: BallParams,
) -> CriticalSplit:
    """Split around the ball B(u, (4 + 2*lam + shift) * s^i).

    Pairs with both endpoints inside the cut radius -- or one inside and the
    partner within the extra delta * s^i slack -- go to the inner instance
    unchanged.  A pair with one endpoint a inside and the partner b beyond
    the slack radius is bridged through a' (the nearest net point to a at
    the snap level): (a, a') joins the inner instance and (a', b) the outer
    one, so solving both sides reconnects the original pair.  Pairs with
    neither endpoint inside go to the outer instance unchanged.  ``shift``
    in [0, 1/2) randomizes the boundary so that few pairs straddle it in
    expectation.
    """
    m = inst.metric
    unit = m.unit
    cut = (Fraction(4 + 2 * lam) + Fraction(shift)) * (hier.s**i) * unit
    slack = cut + params.delta * (hier.s**i) * unit
    j = _snap_level_weak(params.delta * Fraction(hier.s) ** i, hier.s)
    net_j = hier.net(j)
    inner: list[TerminalPair] = []
    outer: list[TerminalPair] = []
    for p in inst.pairs:
        da, db = m.dist(u, p.a), m.dist(u, p.b)
        a_in, b_in = da <= cut, db <= cut
        if a_in and b_in:
            inner.append(p)
        elif a_in or b_in:
            kept, rest = (p.a, p.b) if a_in else (p.b, p.a)
            drest = db if a_in else da
            if drest <= slack:
                inner.append(p)
            else:
                bridge = m.nearest(kept, net_j)
                inner.append(TerminalPair(kept, bridge))
                outer.append(TerminalPair(bridge, rest))
        else:
            outer.append(p)
    return CriticalSplit(
        inner=inst.with_pairs(inner),
        outer=inst.with_pairs(outer),
        cut_radius=cut,
        snap_level=j,
    )


def is_feasible(edges: Iterable[tuple[int, int]], inst: SfpInstance) -> bool:
    """True iff every demanding pair is connected by the given edge set."""
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return all(find(p.a) == find(p.b) for p in inst.demanding_pairs)
