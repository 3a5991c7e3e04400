"""Adaptive cells: weight-scaled sub-cluster grids tracked by the dynamic program.

For a cluster C and a solution component A crossing it, the relevant
resolution depends on w(A): heavy components get coarse cells, light ones
fine cells, clamped between gamma1*s^i and gamma0*s^i.  ``basic_cells``
materializes those cells, ``promoted_virtual`` and ``nonbasic_cells`` pad the
collection so that it refines properly across decomposition levels, and
``enforce_cell_property`` patches a forest until every disjointified region
meets at most one crossing component.

All weights are Fractions in units and all cell scales are exact powers of s,
so the piecewise case analysis in ``h_function`` never involves floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .decomposition import Decomposition
from .errors import SfpError
from .forest import Forest, components
from .metric import floor_log_scale


class NotLaminarError(SfpError):
    pass


class NonPositiveWeightError(SfpError):
    pass


@dataclass(frozen=True)
class CellParams:
    """gamma0 < gamma1 are reciprocal powers of s; fine and coarse cell scales."""

    s: int
    gamma0: Fraction
    gamma1: Fraction
    num_levels: int = 0

    def __post_init__(self):
        if not (0 < self.gamma0 < self.gamma1 <= 1):
            raise ValueError("need 0 < gamma0 < gamma1 <= 1")
        for g in (self.gamma0, self.gamma1):
            if Fraction(self.s) ** floor_log_scale(g, self.s) != g:
                raise ValueError("gamma values must be exact powers of s")

    @property
    def coarse_exp(self) -> int:
        """log_s(1/gamma0)."""
        return -floor_log_scale(self.gamma0, self.s)

    @property
    def fine_exp(self) -> int:
        """log_s(1/gamma1)."""
        return -floor_log_scale(self.gamma1, self.s)

    @staticmethod
    def from_theory(eps: float, dim_bound: int, s: int, num_levels: int) -> "CellParams":
        """gamma0^-1 rounds eps/(k s^2 L) up to a power of s, gamma1^-1 rounds
        eps/s^2 down; unit Theta-constants."""
        k = max(1, dim_bound)
        inv_g0 = Fraction(k * s * s * num_levels) / Fraction(eps)
        inv_g1 = Fraction(s * s) / Fraction(eps)
        e0 = floor_log_scale(inv_g0, s)
        if Fraction(s) ** e0 < inv_g0:
            e0 += 1  # round up to the next power of s
        e1 = max(1, floor_log_scale(inv_g1, s))
        if e0 <= e1:
            e0 = e1 + 1
        return CellParams(
            s=s,
            gamma0=Fraction(1, s**e0),
            gamma1=Fraction(1, s**e1),
            num_levels=num_levels,
        )

    @staticmethod
    def practical(s: int, coarse_exp: int = 2, fine_exp: int = 1, num_levels: int = 0) -> "CellParams":
        if coarse_exp <= fine_exp:
            raise ValueError("coarse_exp must exceed fine_exp")
        return CellParams(
            s=s,
            gamma0=Fraction(1, s**coarse_exp),
            gamma1=Fraction(1, s**fine_exp),
            num_levels=num_levels,
        )


def floor_power_of_scale(l: Fraction, s: int) -> Fraction:
    """Largest power of s that is <= l (exact)."""
    if l <= 0:
        raise NonPositiveWeightError("weight must be positive")
    return Fraction(s) ** floor_log_scale(l, s)


def h_function(i: int, l: Fraction, params: CellParams) -> Fraction:
    """Cell scale for a component of weight ``l`` (units) crossing a height-i
    cluster: gamma1*s^i for heavy components, gamma1*floor_s(l) in the
    adaptive middle band, gamma0*s^i for feather-weight ones."""
    if l <= 0:
        raise NonPositiveWeightError("weight must be positive")
    s = params.s
    scale = Fraction(s) ** i
    floor_l = floor_power_of_scale(l, s)
    if floor_l >= scale:
        return params.gamma1 * scale
    if floor_l >= (params.gamma0 / params.gamma1) * scale:
        return params.gamma1 * floor_l
    return params.gamma0 * scale


def cell_height(i: int, l: Fraction, params: CellParams) -> int:
    """Height of the h(i,l)-cells: log_s of the scale, clamped at 0 (heights
    below the leaf level mean singleton cells)."""
    h = h_function(i, l, params)
    return max(0, floor_log_scale(h, params.s))


def component_weight_units(forest: Forest, comp: frozenset[int]) -> Fraction:
    ticks = sum(forest.metric.dist(a, b) for a, b in forest.edges if a in comp)
    return Fraction(ticks, forest.metric.unit)


@dataclass
class ClusterCells:
    bas: frozenset[int]
    pro: frozenset[int]
    vir: frozenset[int]
    nbas: frozenset[int]
    owner: dict[int, int]  # basic cell -> index of owning crossing component

    @property
    def eff(self) -> frozenset[int]:
        return self.bas | self.nbas


@dataclass
class CellAssignment:
    per_cluster: dict[int, ClusterCells]
    crossing: dict[int, list[frozenset[int]]]  # cluster -> its crossing components

    def eff(self, cid: int) -> frozenset[int]:
        return self.per_cluster[cid].eff


def _crossing_components(dec: Decomposition, comps: list[frozenset[int]], cid: int) -> list[frozenset[int]]:
    members = dec.cluster(cid).members
    return [
        comp
        for comp in comps
        if any(v in members for v in comp) and any(v not in members for v in comp)
    ]


def basic_cells(
    dec: Decomposition,
    forest: Forest,
    cid: int,
    params: CellParams,
    comps: list[frozenset[int]] | None = None,
) -> tuple[frozenset[int], dict[int, int], list[frozenset[int]]]:
    """Basic cells of a cluster: for each crossing component A, the cells of C
    at the A-adaptive height that contain a vertex of A.  Owners are the
    lightest component per cell (component order index breaks ties)."""
    all_comps = comps if comps is not None else components(forest)
    crossing = _crossing_components(dec, all_comps, cid)
    members = dec.cluster(cid).members
    height = dec.cluster(cid).height
    bas: set[int] = set()
    owner: dict[int, int] = {}
    weights = {idx: component_weight_units(forest, comp) for idx, comp in enumerate(all_comps)}
    for idx, comp in enumerate(all_comps):
        if comp not in crossing:
            continue
        w = weights[idx]
        if w <= 0:
            # zero-weight components (co-located points) are treated at the
            # finest resolution
            j = 0
        else:
            j = min(cell_height(height, w, params), max(0, height - 1))
        cells_a = {dec.cluster_at(v, j) for v in comp if v in members}
        for e in cells_a:
            bas.add(e)
            if e not in owner:
                owner[e] = idx
            else:
                cur = owner[e]
                if (weights[idx], idx) < (weights[cur], cur):
                    owner[e] = idx
    return frozenset(bas), owner, crossing


def _siblings(dec: Decomposition, cell: int) -> tuple[int, ...]:
    parent = dec.cluster(cell).parent
    if parent is None:
        return ()
    return tuple(c for c in dec.children(parent) if c != cell)


def promoted_virtual(
    dec: Decomposition,
    cid: int,
    all_bas: dict[int, frozenset[int]],
) -> tuple[frozenset[int], frozenset[int]]:
    """Siblings of basic cells that are not basic themselves either import the
    basic sub-cells of the highest cluster where they are basic (promoted) or
    stand in as-is (virtual)."""
    bas = all_bas[cid]
    # only sub-clusters qualify: a basic cell can be the cluster itself, and
    # its tree siblings lie outside the cluster
    fringe = sorted(
        {sib for e in bas for sib in _siblings(dec, e) if dec.is_descendant(sib, cid)} - bas
    )
    pro: set[int] = set()
    vir: set[int] = set()
    for e in fringe:
        candidates = [
            other
            for other, obas in all_bas.items()
            if other != cid and e in obas and dec.is_descendant(other, cid)
        ]
        if candidates:
            best = max(candidates, key=lambda c: (dec.cluster(c).height, -dec.cluster(c).center))
            pro |= {d for d in all_bas[best] if dec.is_descendant(d, e)}
        else:
            vir.add(e)
    return frozenset(pro), frozenset(vir)


def compute_assignment(dec: Decomposition, forest: Forest, params: CellParams) -> CellAssignment:
    """Full Bas/Pro/Vir/NBas computation: one bottom-free pass for basic
    cells, one pass for promotions, then a top-down inheritance pass."""
    comps = components(forest)
    per: dict[int, ClusterCells] = {}
    all_bas: dict[int, frozenset[int]] = {}
    crossing: dict[int, list[frozenset[int]]] = {}
    for c in dec.clusters:
        bas, owner, cross = basic_cells(dec, forest, c.cid, params, comps)
        all_bas[c.cid] = bas
        crossing[c.cid] = cross
        per[c.cid] = ClusterCells(bas=bas, pro=frozenset(), vir=frozenset(), nbas=frozenset(), owner=owner)
    # cluster ids ascend from the root down, so iterating in order is top-down
    for c in dec.clusters:
        pro, vir = promoted_virtual(dec, c.cid, all_bas)
        inherited: set[int] = set()
        if c.parent is not None:
            for e in per[c.parent].nbas:
                if dec.is_descendant(e, c.cid):
                    inherited.add(e)
                elif dec.is_descendant(c.cid, e):
                    inherited.add(c.cid)
                # disjoint cells vanish under intersection with C
        nbas = (pro | vir | inherited) - all_bas[c.cid]
        per[c.cid] = ClusterCells(
            bas=all_bas[c.cid], pro=pro, vir=vir, nbas=frozenset(nbas), owner=per[c.cid].owner
        )
    return CellAssignment(per_cluster=per, crossing=crossing)


@dataclass(frozen=True)
class DisjointCell:
    inducing: int
    height: int
    points: frozenset[int]


def disjointify(dec: Decomposition, cells: Iterable[int]) -> list[DisjointCell]:
    """One region per cell: the cell minus its strictly-contained fellows.
    Strict containment follows the cluster tree (equal point sets along a
    chain still count as nested).  Empty regions are retained."""
    cs = sorted(set(cells))
    for a in cs:
        for b in cs:
            if a >= b:
                continue
            ma, mb = dec.cluster(a).members, dec.cluster(b).members
            if ma & mb and not (dec.is_descendant(a, b) or dec.is_descendant(b, a)):
                raise NotLaminarError(f"cells {a} and {b} overlap without nesting")
    out = []
    for u in cs:
        inner: set[int] = set()
        for e in cs:
            if e != u and dec.is_descendant(e, u):
                inner |= dec.cluster(e).members
        out.append(
            DisjointCell(
                inducing=u,
                height=dec.cluster(u).height,
                points=frozenset(dec.cluster(u).members - inner),
            )
        )
    return out


def check_refinement(dec: Decomposition, finer: Iterable[int], coarser: Iterable[int]) -> bool:
    """True iff every cell of ``coarser`` is either present in ``finer`` or
    has all of its children present."""
    fine = set(finer)
    for e in coarser:
        if e in fine:
            continue
        kids = dec.children(e)
        if not all(k in fine for k in kids):
            return False
    return True


def check_cell_property(
    forest: Forest,
    dec: Decomposition,
    cell_map: dict[int, Iterable[int]],
) -> list[tuple[int, int]]:
    """Violations (cluster, inducing cell) where a disjointified region meets
    two or more crossing components of the cluster."""
    comps = components(forest)
    out = []
    for cid in sorted(cell_map):
        cells = list(cell_map[cid])
        if not cells:
            continue
        crossing = _crossing_components(dec, comps, cid)
        for region in disjointify(dec, cells):
            hits = sum(1 for comp in crossing if any(v in region.points for v in comp))
            if hits >= 2:
                out.append((cid, region.inducing))
    return out


def enforce_cell_property(
    forest: Forest,
    dec: Decomposition,
    params: CellParams,
) -> tuple[Forest, list[tuple[int, int]]]:
    """Sweep clusters top-down; wherever a basic-cell region meets several
    crossing components, stitch them together with the shortest links inside
    the region.  Each added edge merges two components, so at most
    (#components - 1) edges are ever added.  Repeats the sweep until clean;
    the final forest has no violations for the recomputed basic cells."""
    current = forest
    added: list[tuple[int, int]] = []
    max_sweeps = len(components(forest)) + 1
    for _ in range(max_sweeps):
        changed = False
        for h in range(dec.top_height, -1, -1):
            for cid in dec.height_clusters(h):
                comps = components(current)
                bas, _, crossing = basic_cells(dec, current, cid, params, comps)
                if not bas or len(crossing) < 2:
                    continue
                regions = sorted(disjointify(dec, bas), key=lambda r: (r.height, r.inducing))
                for region in regions:
                    touching = [c for c in crossing if any(v in region.points for v in c)]
                    if len(touching) < 2:
                        continue
                    touching.sort(key=min)
                    base = touching[0]
                    for other in touching[1:]:
                        pick = min(
                            (current.metric.dist(a, b), a, b)
                            for a in sorted(base & region.points)
                            for b in sorted(other & region.points)
                        )
                        edge = (min(pick[1], pick[2]), max(pick[1], pick[2]))
                        current = current.with_edges([edge])
                        added.append(edge)
                        changed = True
                        base = base | other | {edge[0], edge[1]}
                    # component structure shifted; recompute for this cluster
                    comps = components(current)
                    crossing = _crossing_components(dec, comps, cid)
        if not changed:
            break
    leftover = check_cell_property(
        current, dec, {c.cid: basic_cells(dec, current, c.cid, params)[0] for c in dec.clusters}
    )
    assert not leftover, "cell-property enforcement left violations"
    return current, added


def candidate_centers(dec: Decomposition, cid: int, params: CellParams) -> tuple[int, ...]:
    """Net points that could center a cell of this cluster: heights within
    2*log_s(1/gamma0) below the cluster height, within 2*(s^i + s^j) of the
    cluster center (a child cluster at height j reaches at most 2s^j beyond
    a member, and members sit within 2s^i of the center)."""
    c = dec.cluster(cid)
    if c.height == 0:
        return (c.center,)
    hier = dec.hier
    lo = max(0, c.height - 2 * params.coarse_exp)
    out: set[int] = set()
    for j in range(lo, c.height + 1):
        limit = 2 * hier.scale_ticks(c.height) + 2 * hier.scale_ticks(j)
        for v in hier.net(j):
            if dec.metric.dist(v, c.center) <= limit:
                out.add(v)
    return tuple(sorted(out))


def assert_centers_in_candidates(dec: Decomposition, cid: int, cells: Iterable[int], params: CellParams) -> bool:
    allowed = set(candidate_centers(dec, cid, params))
    return all(dec.cluster(e).center in allowed for e in cells)
