"""Finite metric spaces with exact integer distances, nets, and net hierarchies.

All pairwise distances are materialized as non-negative 64-bit integers
("ticks").  Euclidean coordinates are scaled by ``coord_scale`` and the
resulting distances rounded *up*; rounding up preserves the triangle
inequality (rounding to nearest does not).  The smallest nonzero pairwise
distance is designated one *unit*, and every scale threshold elsewhere in the
pipeline (net radii, cluster radii, cell scales) is an exact integer or
Fraction multiple of it, so comparisons never touch floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateInstanceError,
    EmptyInstanceError,
    MetricValidationError,
)

DEFAULT_COORD_SCALE = 10**6

# Above this size the O(n^3) triangle check is done in k-slices to bound memory.
_TRIANGLE_CHUNK = 64


def _ceil_sqrt(value: int) -> int:
    if value <= 0:
        return 0
    return math.isqrt(value - 1) + 1


class MetricSpace:
    """A finite metric on points ``0..n-1`` with integer tick distances."""

    def __init__(self, matrix: np.ndarray, coord_scale: int = 1, validate: bool = True):
        mat = np.asarray(matrix, dtype=np.int64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise MetricValidationError("distance matrix must be square")
        self._d = mat
        self.n = int(mat.shape[0])
        self.coord_scale = int(coord_scale)
        if validate:
            self._validate()
        nonzero = mat[mat > 0]
        self.unit = int(nonzero.min()) if nonzero.size else 1

    def _validate(self) -> None:
        d = self._d
        if (d < 0).any():
            raise MetricValidationError("negative distance")
        if np.diagonal(d).any():
            raise MetricValidationError("nonzero diagonal")
        if not np.array_equal(d, d.T):
            raise MetricValidationError("asymmetric distance matrix")
        # d[i,j] <= d[i,k] + d[k,j] for all i, j, k
        for start in range(0, self.n, _TRIANGLE_CHUNK):
            block = d[:, start : start + _TRIANGLE_CHUNK]
            sums = block[:, :, None] + d[None, start : start + _TRIANGLE_CHUNK, :]
            if (sums < d[:, None, :]).any():
                raise MetricValidationError("triangle inequality violated")

    def dist(self, x: int, y: int) -> int:
        return int(self._d[x, y])

    def dist_units(self, x: int, y: int) -> Fraction:
        return Fraction(int(self._d[x, y]), self.unit)

    def diameter(self) -> int:
        return int(self._d.max()) if self.n else 0

    def matrix(self) -> np.ndarray:
        return self._d

    def points(self) -> range:
        return range(self.n)

    def nearest(self, x: int, candidates: Iterable[int]) -> int:
        """Closest candidate to ``x``; ties broken by smallest point id."""
        best = None
        for c in candidates:
            key = (int(self._d[x, c]), c)
            if best is None or key < best:
                best = key
        if best is None:
            raise ValueError("nearest() needs at least one candidate")
        return best[1]

    def submetric(self, keep: Sequence[int]) -> "MetricSpace":
        idx = np.asarray(list(keep), dtype=np.int64)
        sub = self._d[np.ix_(idx, idx)]
        return MetricSpace(sub, coord_scale=self.coord_scale, validate=False)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"MetricSpace(n={self.n}, unit={self.unit}, diam={self.diameter()})"


def build_metric(
    points: Sequence[Sequence[float]] | None = None,
    matrix: Sequence[Sequence[float]] | None = None,
    coord_scale: int = DEFAULT_COORD_SCALE,
) -> MetricSpace:
    """Build a MetricSpace from Euclidean coordinates or an explicit matrix.

    Coordinates are scaled to integers first and distances computed with exact
    integer arithmetic, rounded up.  An explicit matrix is used verbatim when
    every entry is integral; otherwise each entry is scaled by ``coord_scale``
    and rounded up.
    """
    if (points is None) == (matrix is None):
        raise ValueError("provide exactly one of points= or matrix=")
    if points is not None:
        pts = [tuple(round(float(c) * coord_scale) for c in p) for p in points]
        if not pts:
            raise MetricValidationError("need at least one point")
        dims = {len(p) for p in pts}
        if len(dims) != 1:
            raise MetricValidationError("points must share one dimension")
        n = len(pts)
        d = np.zeros((n, n), dtype=np.int64)
        for i in range(n):
            for j in range(i + 1, n):
                sq = sum((a - b) * (a - b) for a, b in zip(pts[i], pts[j]))
                d[i, j] = d[j, i] = _ceil_sqrt(sq)
        return MetricSpace(d, coord_scale=coord_scale, validate=False)

    arr = np.asarray(matrix, dtype=np.float64)
    if np.all(arr == np.floor(arr)):
        ticks = arr.astype(np.int64)
        scale = 1
    else:
        ticks = np.ceil(arr * coord_scale - 1e-9).astype(np.int64)
        np.fill_diagonal(ticks, 0)
        scale = coord_scale
    return MetricSpace(ticks, coord_scale=scale, validate=True)


def greedy_net(
    metric: MetricSpace,
    radius,
    candidates: Sequence[int] | None = None,
) -> list[int]:
    """Greedy net over ``candidates`` (default: all points), ascending by id.

    The result S satisfies d(x, y) > radius for distinct x, y in S (packing)
    and every candidate lies within ``radius`` of some s in S (cover).
    ``radius`` may be an int or Fraction in ticks.
    """
    pool = list(candidates) if candidates is not None else list(metric.points())
    chosen: list[int] = []
    for p in pool:
        if all(metric.dist(p, c) > radius for c in chosen):
            chosen.append(p)
    return chosen


@dataclass
class NetCheck:
    packing_ok: bool
    cover_ok: bool
    worst_cover: int
    closest_centers: int

    @property
    def ok(self) -> bool:
        return self.packing_ok and self.cover_ok


def verify_packing_cover(
    metric: MetricSpace,
    centers: Sequence[int],
    covered: Sequence[int],
    radius,
    cover_slack: Fraction = Fraction(1),
) -> NetCheck:
    """Check that ``centers`` is a radius-packing and covers ``covered``
    within ``cover_slack * radius``.  Returns diagnostics, never raises."""
    centers = list(centers)
    if not centers:
        return NetCheck(packing_ok=True, cover_ok=not covered, worst_cover=-1, closest_centers=-1)
    closest = min(
        (metric.dist(a, b) for i, a in enumerate(centers) for b in centers[i + 1 :]),
        default=-1,
    )
    packing_ok = closest == -1 or closest > radius
    worst = max((min(metric.dist(p, c) for c in centers) for p in covered), default=0)
    cover_ok = worst <= cover_slack * radius
    return NetCheck(packing_ok=packing_ok, cover_ok=cover_ok, worst_cover=worst, closest_centers=closest)


class NetHierarchy:
    """Nested nets N_0 >= N_1 >= ... >= N_{L-1} with N_i an (s^i)-net built
    greedily from N_{i-1}; N_0 is every point, N_{L-1} a single point.

    Because each level is drawn from the previous one rather than from the
    whole space, level i covers all of X within (s/(s-1)) * s^i units instead
    of the plain s^i; callers that care pass that slack to
    ``verify_packing_cover``.
    """

    def __init__(self, metric: MetricSpace, s: int, levels: list[list[int]]):
        self.metric = metric
        self.s = s
        self.levels = levels
        self.level_of = [0] * metric.n
        self._sets = [frozenset(lv) for lv in levels]
        for i, lv in enumerate(levels):
            for p in lv:
                self.level_of[p] = i

    @property
    def top(self) -> int:
        return len(self.levels) - 1

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def net(self, i: int) -> list[int]:
        return self.levels[max(0, min(i, self.top))]

    def in_net(self, p: int, i: int) -> bool:
        return self.level_of[p] >= min(i, self.top) or i <= 0

    def scale_ticks(self, i: int) -> int:
        """s^i units expressed in ticks (exact integer)."""
        return (self.s ** max(0, i)) * self.metric.unit


def build_hierarchy(metric: MetricSpace, s: int = 4, min_levels: int = 2) -> NetHierarchy:
    """Build the nested net hierarchy, tall enough that the top scale
    dominates the diameter (so a single top-level net point remains)."""
    if s < 2:
        raise ValueError("net hierarchy needs s >= 2")
    diam = metric.diameter()
    num = max(min_levels, 2)
    while (s ** (num - 1)) * metric.unit < diam:
        num += 1
    levels = [list(metric.points())]
    for i in range(1, num):
        radius = (s**i) * metric.unit
        levels.append(greedy_net(metric, radius, candidates=levels[i - 1]))
    return NetHierarchy(metric, s, levels)


def floor_log_scale(x: Fraction, s: int) -> int:
    """Largest integer m (possibly negative) with s**m <= x; x must be > 0."""
    if x <= 0:
        raise ValueError("floor_log_scale needs x > 0")
    m = 0
    if x >= 1:
        while Fraction(s) ** (m + 1) <= x:
            m += 1
    else:
        while Fraction(s) ** m > x:
            m -= 1
    return m


@dataclass
class RescaleResult:
    """Outcome of snapping an instance onto a coarse net.

    ``metric`` and ``instance`` are the reduced versions; ``new_to_old`` maps
    surviving indices back to the original points and ``old_to_new`` sends
    every original point to the surviving index it snapped onto.  Pairs whose
    endpoints snapped together are recorded in ``collapsed_pairs`` (they cost
    at most 2*rho each to reattach).
    """

    metric: MetricSpace
    pairs: tuple[tuple[int, int], ...]
    new_to_old: tuple[int, ...]
    old_to_new: dict[int, int]
    net_radius: Fraction
    collapsed_pairs: tuple[tuple[int, int], ...]


def rescale_instance(
    metric: MetricSpace,
    pairs: Sequence[tuple[int, int]],
    eps: float,
) -> RescaleResult:
    """Snap all points to an (eps*R / (32 n^2))-net, where R is the largest
    pair distance, and reindex.  The optimum of the snapped instance differs
    from the original by at most an O(eps) fraction of R, while the spread
    of the surviving metric becomes polynomial in n.
    """
    if not pairs:
        raise EmptyInstanceError("rescale needs at least one terminal pair")
    big_r = max(metric.dist(a, b) for a, b in pairs)
    if big_r == 0:
        raise DegenerateInstanceError("all terminal pairs coincide")
    rho = Fraction(eps) * big_r / (32 * metric.n * metric.n)
    survivors = greedy_net(metric, rho)
    old_to_new: dict[int, int] = {}
    for p in metric.points():
        snap = metric.nearest(p, survivors)
        old_to_new[p] = survivors.index(snap)
    new_metric = metric.submetric(survivors)
    mapped: list[tuple[int, int]] = []
    collapsed: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for a, b in pairs:
        na, nb = old_to_new[a], old_to_new[b]
        if na == nb:
            collapsed.append((a, b))
            continue
        key = (min(na, nb), max(na, nb))
        if key not in seen:
            seen.add(key)
            mapped.append(key)
    return RescaleResult(
        metric=new_metric,
        pairs=tuple(mapped),
        new_to_old=tuple(survivors),
        old_to_new=old_to_new,
        net_radius=rho,
        collapsed_pairs=tuple(collapsed),
    )
