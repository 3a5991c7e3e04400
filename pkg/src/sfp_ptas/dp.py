"""Dynamic program over decomposition clusters.

State per cluster: which portals are active (``r``), how they are connected
inside (``y``, a partition of ``r``), which cells the crossing components
occupy (``bas``/``nbas``), how cell regions attach to portal parts (``g``),
and which parts are promised to be connected further outside (``p``).

Values are computed bottom-up.  Each cluster combines one entry per child
with a cross-child *portal graph*: vertices are the children's declared
portals plus undeclared, untouched portals (free pass-through points), edges
join portals of different children within four cluster scales.  Claimed
connections are grouped, and every multi-part group is connected by an exact
miniature Steiner computation over that graph, with groups kept
vertex-disjoint so the claimed partition is exactly what the edges realize.

The enumeration is exhaustive within explicit caps; whenever a cap actually
truncates something, a named flag is recorded so downstream consumers know
optimality may have been lost.  Output is sound regardless: extraction
rebuilds the concrete edge set, and its weight always equals the reported
value.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import asdict, dataclass, field
from itertools import combinations, product
from typing import Iterable, Iterator, Sequence

import numpy as np

from .baselines import set_partitions
from .cells import CellParams, candidate_centers, compute_assignment, disjointify
from .decomposition import Decomposition, is_portal_respecting
from .errors import SfpError
from .forest import Forest
from .instance import SfpInstance, is_feasible

INF = float("inf")


class MissingBackPointerError(SfpError):
    pass


@dataclass(frozen=True)
class DpCaps:
    r_cap: int = 4
    rho_cap: int = 8
    edge_cap: int = 6
    max_parts: int = 8
    max_entries_per_cluster: int = 256
    max_combos_per_cluster: int = 4000
    max_groupings_per_cluster: int = 60000
    max_pass_through: int = 10
    max_optional_groups: int = 2
    max_forced_cells: int = 3

    def to_json(self) -> dict:
        return dict(sorted(asdict(self).items()))


@dataclass(frozen=True)
class Entry:
    """One DP state; every field is canonically sorted so equal states have
    equal keys."""

    cluster: int
    r: tuple[int, ...]
    y: tuple[tuple[int, ...], ...]
    bas: tuple[int, ...]
    nbas: tuple[int, ...]
    g: tuple[tuple[int, tuple[int, ...]], ...]
    p: tuple[tuple[int, ...], ...]
    sealed: tuple[int, ...]


@dataclass
class EntryMeta:
    value: int
    children: tuple[Entry, ...]
    g_edges: tuple[tuple[int, int], ...]
    touched: frozenset[int]
    # (inducing cell, region points, attached part indices); carried so the
    # parent can aggregate promises without recomputing child regions
    regions: tuple[tuple[int, frozenset[int], tuple[int, ...]], ...]


@dataclass
class DpStats:
    entries: int = 0
    combos: int = 0
    groupings: int = 0
    flags: set[str] = field(default_factory=set)
    per_height_s: dict[int, float] = field(default_factory=dict)
    per_height_groupings: dict[int, int] = field(default_factory=dict)

    @property
    def cap_exceeded(self) -> bool:
        return bool(self.flags)

    def to_json(self) -> dict:
        return {
            "entries": self.entries,
            "combos": self.combos,
            "groupings": self.groupings,
            "flags": sorted(self.flags),
            "cap_exceeded": self.cap_exceeded,
            "per_height_s": {str(k): round(v, 6) for k, v in sorted(self.per_height_s.items())},
            "per_height_groupings": {
                str(k): v for k, v in sorted(self.per_height_groupings.items())
            },
        }


def _canon_parts(parts: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted(tuple(sorted(p)) for p in parts if p))


_PARTITIONS_CACHE: dict[int, tuple[tuple[tuple[int, ...], ...], ...]] = {}


def _partitions_of(n: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All set partitions of range(n), materialized once per size."""
    if n not in _PARTITIONS_CACHE:
        _PARTITIONS_CACHE[n] = tuple(
            tuple(tuple(b) for b in part) for part in set_partitions(n)
        )
    return _PARTITIONS_CACHE[n]


def _best_first_indices(value_lists: Sequence[Sequence[int]]) -> Iterator[tuple[int, ...]]:
    """Index tuples over the given sorted value lists, cheapest total first.

    Exhaustive when consumed fully; when a cap stops consumption early, the
    prefix seen is the most promising slice instead of a lexicographic one.
    """
    start = (0,) * len(value_lists)
    heap = [(sum(vl[0] for vl in value_lists), start)]
    seen = {start}
    while heap:
        total, idx = heapq.heappop(heap)
        yield idx
        for i, vl in enumerate(value_lists):
            j = idx[i] + 1
            if j < len(vl):
                nxt = idx[:i] + (j,) + idx[i + 1 :]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (total - vl[j - 1] + vl[j], nxt))


class _Dsu:
    def __init__(self, items: Iterable):
        self.parent = {x: x for x in items}

    def clone(self) -> "_Dsu":
        other = _Dsu(())
        other.parent = dict(self.parent)
        return other

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True

    def groups(self) -> dict:
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), set()).add(x)
        return out


def _floyd(verts: list[int], edges: dict[tuple[int, int], int]):
    """All-pairs shortest paths with deterministic successor reconstruction."""
    idx = {v: i for i, v in enumerate(verts)}
    n = len(verts)
    dist: list[list[float]] = [[INF] * n for _ in range(n)]
    nxt: list[list[int | None]] = [[None] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = 0
    for (a, b), w in sorted(edges.items()):
        ia, ib = idx[a], idx[b]
        if w < dist[ia][ib]:
            dist[ia][ib] = dist[ib][ia] = w
            nxt[ia][ib] = ib
            nxt[ib][ia] = ia
    for k in range(n):
        dk = dist[k]
        for i in range(n):
            dik = dist[i][k]
            if dik == INF:
                continue
            di = dist[i]
            ni = nxt[i]
            for j in range(n):
                cand = dik + dk[j]
                if cand < di[j]:
                    di[j] = cand
                    ni[j] = ni[k]
    return idx, dist, nxt


def _sp_path(idx, nxt, verts: list[int], a: int, b: int) -> list[int] | None:
    if a == b:
        return [a]
    ia, ib = idx[a], idx[b]
    if nxt[ia][ib] is None:
        return None
    path = [a]
    cur = ia
    while cur != ib:
        cur = nxt[cur][ib]
        path.append(verts[cur])
    return path


def _steiner_over_parts(
    part_sets: Sequence[frozenset[int]],
    sp: tuple[dict[int, int], list[list[float]], list[list[int | None]]],
    edge_w: dict[tuple[int, int], int],
) -> tuple[int, list[tuple[int, int]], set[int]] | None:
    """Exact minimum-weight connection of the given portal-sets inside the
    portal graph whose shortest paths are ``sp`` (as returned by ``_floyd``
    over the allowed vertex pool).  Each part is one contracted terminal (its
    portals are internally connected for free).  Returns (cost, graph edges
    used, vertices used), or None if impossible."""
    idx, dist, nxt = sp
    pool = list(idx)

    t = len(part_sets)
    if t <= 1:
        return 0, [], set()

    def pv_dist(pi: int, v: int) -> float:
        iv = idx[v]
        return min(dist[idx[p]][iv] for p in sorted(part_sets[pi]))

    rest = list(range(1, t))
    f: dict[tuple[frozenset[int], int], tuple[float, tuple]] = {}
    for q in rest:
        for v in pool:
            f[(frozenset([q]), v)] = (pv_dist(q, v), ("direct", q))
    for size in range(2, len(rest) + 1):
        for combo in combinations(rest, size):
            dset = frozenset(combo)
            anchor = min(dset)
            others = sorted(dset - {anchor})
            g: dict[int, tuple[float, tuple]] = {}
            for u in pool:
                best: tuple[float, tuple] | None = None
                for r in range(0, len(others)):
                    for pick in combinations(others, r):
                        half = frozenset((anchor,) + pick)
                        rest_half = dset - half
                        if not rest_half:
                            continue
                        cand = f[(half, u)][0] + f[(rest_half, u)][0]
                        if best is None or cand < best[0]:
                            best = (cand, ("split", half))
                if best is not None:
                    g[u] = best
            for v in pool:
                bf: tuple[float, tuple] | None = None
                iv = idx[v]
                for u in pool:
                    if u not in g:
                        continue
                    cand = dist[iv][idx[u]] + g[u][0]
                    if bf is None or cand < bf[0]:
                        bf = (cand, ("via", u, g[u][1]))
                if bf is None:
                    return None
                f[(dset, v)] = bf

    full = frozenset(rest)
    best_final: tuple[float, int, int] | None = None
    for p0 in sorted(part_sets[0]):
        i0 = idx[p0]
        for v in pool:
            cand = dist[i0][idx[v]] + f[(full, v)][0]
            if best_final is None or cand < best_final[0]:
                best_final = (cand, p0, v)
    if best_final is None or best_final[0] == INF:
        return None

    edges: set[tuple[int, int]] = set()
    used: set[int] = set()

    def expand(a: int, b: int) -> None:
        path = _sp_path(idx, nxt, pool, a, b)
        assert path is not None
        used.update(path)
        for x, y in zip(path, path[1:]):
            edges.add((min(x, y), max(x, y)))

    def nearest_portal(pi: int, v: int) -> int:
        iv = idx[v]
        return min(sorted(part_sets[pi]), key=lambda p: (dist[idx[p]][iv], p))

    def unwind(dset: frozenset[int], v: int) -> None:
        _, step = f[(dset, v)]
        if step[0] == "direct":
            expand(nearest_portal(step[1], v), v)
            return
        _, u, inner = step
        expand(v, u)
        half = inner[1]
        unwind(half, u)
        unwind(dset - half, u)

    _, p0, v0 = best_final
    expand(p0, v0)
    unwind(full, v0)
    cost = sum(edge_w[e] for e in edges)
    return cost, sorted(edges), used


@dataclass
class _ComboContext:
    """Portal graph shared by every grouping of one child-entry combination.

    The shortest-path and Steiner caches are keyed by the allowed vertex set
    (and parts), and are shared across combos whose vertex set coincides, so
    repeated groupings do the expensive work once.
    """

    verts: list[int]
    edge_w: dict[tuple[int, int], int]
    sp_cache: dict[frozenset[int], tuple]
    steiner_cache: dict[tuple, tuple[int, tuple[tuple[int, int], ...], frozenset[int]] | None]
    # whole-grouping routing results; the outcome depends only on the blocks'
    # portal sets and the declared vertices, both in the key
    route_cache: dict[tuple, tuple[tuple[tuple[int, int], ...], int, frozenset[int]] | None]
    # per-component grouping options (positional form); identical portal
    # profiles across child-entry combinations reuse the full enumeration
    comp_cache: dict[tuple, list]

    def shortest_paths(self, allowed: frozenset[int]) -> tuple:
        sp = self.sp_cache.get(allowed)
        if sp is None:
            pool = [v for v in self.verts if v in allowed]
            sub = {
                e: w
                for e, w in self.edge_w.items()
                if e[0] in allowed and e[1] in allowed
            }
            sp = _floyd(pool, sub)
            self.sp_cache[allowed] = sp
        return sp

    def steiner(
        self, part_sets: list[frozenset[int]], allowed: frozenset[int]
    ) -> tuple[int, tuple[tuple[int, int], ...], frozenset[int]] | None:
        key = (tuple(sorted(tuple(sorted(p)) for p in part_sets)), allowed)
        if key in self.steiner_cache:
            return self.steiner_cache[key]
        res = _steiner_over_parts(part_sets, self.shortest_paths(allowed), self.edge_w)
        if res is not None:
            cost, edges, used = res
            res = (cost, tuple(edges), frozenset(used))
        self.steiner_cache[key] = res
        return res


class SparseDp:
    def __init__(
        self,
        dec: Decomposition,
        instance: SfpInstance,
        cell_params: CellParams,
        caps: DpCaps | None = None,
    ):
        self.dec = dec
        self.inst = instance
        self.metric = dec.metric
        self.cells = cell_params
        self.caps = caps or DpCaps()
        self.stats = DpStats()
        self.tables: dict[int, dict[Entry, EntryMeta]] = {}
        self._can_cache: dict[int, frozenset[int]] = {}
        self._solved = False
        self._final_value: int | None = None
        self.pairs = [p.as_tuple() for p in instance.demanding_pairs]
        self.demanding_terms = sorted({t for p in self.pairs for t in p})

    # ---------------------------------------------------------- base level

    def _base_entry(self, cid: int) -> tuple[Entry, EntryMeta]:
        cluster = self.dec.cluster(cid)
        (x,) = tuple(cluster.members)
        entry = Entry(
            cluster=cid,
            r=(x,),
            y=((x,),),
            bas=(cid,),
            nbas=(),
            g=((cid, (0,)),),
            p=((0,),),
            sealed=(),
        )
        meta = EntryMeta(
            value=0,
            children=(),
            g_edges=(),
            touched=frozenset(),
            regions=((cid, frozenset({x}), (0,)),),
        )
        return entry, meta

    # ------------------------------------------------------------- solving

    def solve(self) -> int | None:
        if self._solved:
            return self._final_value
        for h in range(0, self.dec.top_height + 1):
            t0 = time.monotonic()
            g0 = self.stats.groupings
            for cid in self.dec.height_clusters(h):
                if h == 0:
                    e, m = self._base_entry(cid)
                    self.tables[cid] = {e: m}
                else:
                    self.tables[cid] = self._expand(cid)
                self.stats.entries += len(self.tables[cid])
            self.stats.per_height_s[h] = self.stats.per_height_s.get(h, 0.0) + (
                time.monotonic() - t0
            )
            self.stats.per_height_groupings[h] = self.stats.per_height_groupings.get(
                h, 0
            ) + (self.stats.groupings - g0)
        meta = self.tables[self.dec.root_id].get(self.final_entry())
        self._final_value = meta.value if meta is not None else None
        self._solved = True
        return self._final_value

    def final_entry(self) -> Entry:
        return Entry(
            cluster=self.dec.root_id, r=(), y=(), bas=(), nbas=(), g=(), p=(), sealed=()
        )

    def _candidates(self, cid: int) -> frozenset[int]:
        if cid not in self._can_cache:
            self._can_cache[cid] = frozenset(candidate_centers(self.dec, cid, self.cells))
        return self._can_cache[cid]

    # ------------------------------------------------------ per-cluster DP

    def _expand(self, cid: int) -> dict[Entry, EntryMeta]:
        dec = self.dec
        child_ids = dec.children(cid)
        lists = []
        for ch in child_ids:
            items = sorted(
                self.tables[ch].items(),
                key=lambda kv: (kv[1].value, kv[0].r, kv[0].y, kv[0].bas),
            )
            if not items:
                return {}
            lists.append(items)
        table: dict[Entry, EntryMeta] = {}
        self._vert_cache: dict[tuple[int, ...], tuple] = {}
        self._groupings_left = self.caps.max_groupings_per_cluster
        cluster = dec.cluster(cid)
        members = cluster.members
        height = cluster.height
        is_root = cid == dec.root_id
        scale_cap = 4 * dec.hier.scale_ticks(height)
        portal_c = frozenset(dec.portals(cid))
        in_c = frozenset(t for t in self.demanding_terms if t in members)
        pairs_cross: list[tuple[int, int]] = []
        isolated: list[int] = []
        for a, b in self.pairs:
            a_in, b_in = a in members, b in members
            if a_in and b_in:
                if dec.cluster_at(a, height - 1) != dec.cluster_at(b, height - 1):
                    pairs_cross.append((a, b))
            elif a_in:
                isolated.append(a)
            elif b_in:
                isolated.append(b)

        n_combos = 0
        value_lists = [[meta.value for _, meta in lst] for lst in lists]
        for pick_idx in _best_first_indices(value_lists):
            n_combos += 1
            if n_combos > self.caps.max_combos_per_cluster:
                self.stats.flags.add("combo_cap")
                break
            if self._groupings_left <= 0:
                self.stats.flags.add("grouping_cap")
                break
            self.stats.combos += 1
            picks = [lists[i][j] for i, j in enumerate(pick_idx)]
            self._process_combo(
                cid, child_ids, picks, table, height, is_root,
                scale_cap, portal_c, in_c, pairs_cross, isolated,
            )

        if len(table) > self.caps.max_entries_per_cluster:
            self.stats.flags.add("entry_cap")
            kept = sorted(
                table.items(), key=lambda kv: (kv[1].value, kv[0].r, kv[0].y, kv[0].bas)
            )
            table = dict(kept[: self.caps.max_entries_per_cluster])
        return table

    def _process_combo(
        self, cid, child_ids, picks, table, height, is_root,
        scale_cap, portal_c, in_c, pairs_cross, isolated,
    ) -> None:
        dec, caps, m = self.dec, self.caps, self.metric

        nodes: list[tuple[int, int, frozenset[int]]] = []
        for i, (e, _) in enumerate(picks):
            for pi, part in enumerate(e.y):
                nodes.append((i, pi, frozenset(part)))
        node_key = {(n[0], n[1]): k for k, n in enumerate(nodes)}

        # terminal -> part-nodes its child region attaches to; a demanded
        # terminal with no attachment anywhere dooms every grouping, so the
        # whole combination can be dropped before any graph work
        att_keys: dict[int, set[int]] = {}
        for i, (e, meta) in enumerate(picks):
            for (_, pts, parts) in meta.regions:
                hit = pts & in_c
                if not hit:
                    continue
                ks = {node_key[(i, pi)] for pi in parts}
                for t in hit:
                    att_keys.setdefault(t, set()).update(ks)
        for a, b in pairs_cross:
            if not att_keys.get(a) or not att_keys.get(b):
                return
        for a in isolated:
            if not att_keys.get(a):
                return

        declared: set[int] = set()
        for e, _ in picks:
            declared.update(e.r)
        pass_pool: list[int] = []
        for i, ch in enumerate(child_ids):
            ent, meta = picks[i]
            rset = set(ent.r)
            sset = set(ent.sealed)
            for p in dec.portals(ch):
                if p not in rset and p not in meta.touched and p not in sset:
                    pass_pool.append(p)
        center = dec.cluster(cid).center
        pass_pool.sort(key=lambda p: (m.dist(p, center), p))
        if len(pass_pool) > caps.max_pass_through:
            self.stats.flags.add("pass_cap")
            pass_pool = pass_pool[: caps.max_pass_through]
        verts = sorted(declared | set(pass_pool))
        vkey = tuple(verts)
        cached = self._vert_cache.get(vkey)
        if cached is None:
            child_of: dict[int, int] = {}
            for i, ch in enumerate(child_ids):
                mem = dec.cluster(ch).members
                for p in verts:
                    if p in mem:
                        child_of[p] = i
            edge_w: dict[tuple[int, int], int] = {}
            if verts:
                varr = np.asarray(verts, dtype=np.int64)
                dmat = m.matrix()[np.ix_(varr, varr)]
                carr = np.asarray([child_of[v] for v in verts], dtype=np.int64)
                ii, jj = np.triu_indices(len(verts), 1)
                keep = (carr[ii] != carr[jj]) & (dmat[ii, jj] <= scale_cap)
                for i, j, d in zip(ii[keep], jj[keep], dmat[ii, jj][keep]):
                    edge_w[(verts[int(i)], verts[int(j)])] = int(d)
            conn = _Dsu(verts)
            for a, b in edge_w:
                conn.union(a, b)
            cached = (edge_w, conn, _ComboContext(verts, edge_w, {}, {}, {}, {}))
            self._vert_cache[vkey] = cached
        edge_w, conn, ctx = cached

        # which part-nodes may group with others: parts some terminal attaches
        # to, and multi-portal parts (potential transit)
        terminal_linked: set[int] = set().union(set(), *att_keys.values())
        groupable = [
            k for k, n in enumerate(nodes) if k in terminal_linked or len(n[2]) >= 2
        ]

        # nodes interact iff some portals of theirs are connected in the
        # portal graph; group them by shared connectivity component
        comp_dsu = _Dsu(groupable)
        seen_root: dict[int, int] = {}
        for k in groupable:
            for p in sorted(nodes[k][2]):
                root = conn.find(p)
                if root in seen_root:
                    comp_dsu.union(seen_root[root], k)
                else:
                    seen_root[root] = k
        icomps = sorted((sorted(g) for g in comp_dsu.groups().values()), key=lambda g: g[0])
        trimmed = []
        for g in icomps:
            if len(g) > caps.max_parts:
                self.stats.flags.add("parts_cap")
                g = g[: caps.max_parts]
            trimmed.append(g)
        icomps = trimmed

        # combo-invariant pieces shared by every grouping below
        promise_keys: list[frozenset[int]] = []
        for i, (e, _) in enumerate(picks):
            for q in e.p:
                if len(q) >= 2:
                    promise_keys.append(frozenset(node_key[(i, pi)] for pi in q))
        node_pkey = [tuple(sorted(n[2])) for n in nodes]
        declared_f = frozenset(declared)
        child_values = sum(meta.value for _, meta in picks)
        touched_base = set().union(set(), *(meta.touched for _, meta in picks))
        base_dsu = _Dsu(verts)
        for _, _, part in nodes:
            plist = sorted(part)
            for p in plist[1:]:
                base_dsu.union(plist[0], p)
        route_cache = ctx.route_cache
        miss = object()

        # nodes outside any interaction component keep their own part as a
        # group; routing never touches other nodes' declared portals, so these
        # stay isolated under every grouping
        comp_node_set = {k for g in icomps for k in g}

        # at the root nothing forwards outside: every demanded pair must merge
        # here and every promise must close.  A pair or promise that no single
        # component can realize kills the combination, and a component that is
        # the only venue for a merge keeps only partitions performing it.
        must_merge: list[list[tuple[frozenset[int], frozenset[int]]]] = [
            [] for _ in icomps
        ]
        must_close: list[list[frozenset[int]]] = [[] for _ in icomps]
        if is_root:
            comp_of: dict[int, int] = {}
            for ci, g in enumerate(icomps):
                for k in g:
                    comp_of[k] = ci
            for a, b in pairs_cross:
                ka, kb = att_keys[a], att_keys[b]
                if ka & kb:
                    continue
                venues = {comp_of.get(k) for k in ka} & {comp_of.get(k) for k in kb}
                venues.discard(None)
                if not venues:
                    return
                if len(venues) == 1:
                    (ci,) = venues
                    must_merge[ci].append(
                        (
                            frozenset(k for k in ka if comp_of.get(k) == ci),
                            frozenset(k for k in kb if comp_of.get(k) == ci),
                        )
                    )
            for pk in promise_keys:
                if len(pk) < 2:
                    continue
                cis = {comp_of.get(k) for k in pk}
                if len(cis) != 1 or None in cis:
                    return
                (ci,) = cis
                must_close[ci].append(pk)
        fixed_node_group: dict[int, int] = {}
        fixed_group_portals: dict[int, frozenset[int]] = {}
        for k, n in enumerate(nodes):
            if k not in comp_node_set:
                rep = base_dsu.find(min(n[2]))
                fixed_node_group[k] = rep
                fixed_group_portals[rep] = n[2]

        # interaction components live in disjoint portal-graph regions, so
        # routing, validity, and realized connectivity decompose per
        # component; enumerate each component's partitions once and combine
        # only the valid outcomes
        comp_options: list[
            list[tuple[int, tuple, list[tuple[int, frozenset[int], frozenset[int]]]]]
        ] = []
        for ci, g in enumerate(icomps):
            # option lists depend only on the component's portal profile, the
            # declared set, and the root necessities, so they are shared
            # across child-entry combinations in positional form
            pos = {k: j for j, k in enumerate(g)}
            mm_pos = tuple(
                (
                    frozenset(pos[k] for k in ka),
                    frozenset(pos[k] for k in kb),
                )
                for ka, kb in must_merge[ci]
            )
            mc_pos = tuple(frozenset(pos[k] for k in pk) for pk in must_close[ci])
            ckey = (
                tuple(node_pkey[k] for k in g),
                declared_f,
                tuple((tuple(sorted(a)), tuple(sorted(b))) for a, b in mm_pos),
                tuple(tuple(sorted(p)) for p in mc_pos),
            )
            raw = ctx.comp_cache.get(ckey)
            if raw is None:
                raw = self._comp_grouping_options(
                    g, nodes, node_pkey, declared, declared_f, mm_pos, mc_pos,
                    verts, base_dsu, ctx,
                )
                ctx.comp_cache[ckey] = raw
            if not raw:
                return
            comp_options.append((g, raw))

        # options are translated from positional form only when the best-first
        # walk actually reaches them
        remap_memo: list[dict[int, tuple]] = [{} for _ in comp_options]

        def opt_at(ci_: int, j: int) -> tuple:
            got = remap_memo[ci_].get(j)
            if got is None:
                g_, raw_ = comp_options[ci_]
                cost, edges, gps = raw_[j]
                got = (
                    cost,
                    edges,
                    [
                        (rep, [g_[p] for p in bpos], mem)
                        for rep, bpos, mem in gps
                    ],
                )
                remap_memo[ci_][j] = got
            return got

        rank_lists = [list(range(len(raw))) for _, raw in comp_options]
        for idx in _best_first_indices(rank_lists):
            if self._groupings_left <= 0:
                self.stats.flags.add("grouping_cap")
                return
            self._groupings_left -= 1
            self.stats.groupings += 1
            chosen = [opt_at(i, j) for i, j in enumerate(idx)]
            g_cost = sum(c for c, _, _ in chosen)
            n_edges = sum(len(es) for _, es, _ in chosen)
            if n_edges > caps.edge_cap:
                self.stats.flags.add("edge_cap")
                continue
            g_edges = tuple(sorted(e for _, es, _ in chosen for e in es))
            node_group = dict(fixed_node_group)
            group_portals: dict[int, frozenset[int]] = dict(fixed_group_portals)
            for _, _, gps in chosen:
                for rep, blk, portals in gps:
                    for k in blk:
                        node_group[k] = rep
                    group_portals[rep] = portals

            self._derive_entries(
                cid, picks, node_key, node_group, group_portals,
                att_keys, promise_keys, child_values, touched_base,
                g_edges, g_cost, table, is_root, portal_c,
                pairs_cross, isolated,
            )

    def _comp_grouping_options(
        self, g, nodes, node_pkey, declared, declared_f, mm_pos, mc_pos,
        verts, base_dsu, ctx,
    ) -> list[tuple[int, tuple, list[tuple[int, tuple[int, ...], frozenset[int]]]]]:
        """All valid groupings of one interaction component, positional form.

        Each option is (routing cost, routing edges, groups), a group being
        (component representative, block positions within ``g``, vertices of
        the realized connectivity component).  Options come out sorted
        cheapest first so budgeted truncation keeps the likely minima.
        """
        caps = self.caps
        opts: list[tuple[int, tuple, list[tuple[int, tuple[int, ...], frozenset[int]]]]] = []
        route_cache = ctx.route_cache
        miss = object()
        for part in _partitions_of(len(g)):
            if any(
                not any(set(blk) & ka and set(blk) & kb for blk in part)
                for ka, kb in mm_pos
            ) or any(not any(pk <= set(blk) for blk in part) for pk in mc_pos):
                continue
            multi = [tuple(g[p] for p in blk) for blk in part if len(blk) > 1]
            if multi:
                rkey = (
                    tuple(tuple(node_pkey[k] for k in b) for b in multi),
                    declared_f,
                )
                routed = route_cache.get(rkey, miss)
                if routed is miss:
                    routed = self._connect_blocks(
                        nodes, [frozenset(b) for b in multi], declared, ctx
                    )
                    route_cache[rkey] = routed
                if routed is None:
                    continue
            else:
                routed = ((), 0, frozenset())
            c_edges, c_cost, _used = routed
            if len(c_edges) > caps.edge_cap:
                self.stats.flags.add("edge_cap")
                continue
            dsu = base_dsu.clone()
            for a, b in c_edges:
                dsu.union(a, b)
            groups: list[tuple[int, tuple[int, ...]]] = []
            reps_seen: set[int] = set()
            ok = True
            for blk in part:
                reps = {dsu.find(min(nodes[g[p]][2])) for p in blk}
                if len(reps) != 1 or reps <= reps_seen:
                    # split or coarser than intended: the realized grouping
                    # is covered by another partition directly
                    ok = False
                    break
                rep = reps.pop()
                reps_seen.add(rep)
                groups.append((rep, blk))
            if not ok:
                continue
            members: dict[int, set[int]] = {}
            for v in verts:
                r = dsu.find(v)
                if r in reps_seen:
                    members.setdefault(r, set()).add(v)
            opts.append(
                (
                    c_cost,
                    c_edges,
                    [(rep, blk, frozenset(members[rep])) for rep, blk in groups],
                )
            )
        # cheapest routings first, so an exhausted budget keeps the groupings
        # most likely to carry the minimum
        opts.sort(key=lambda o: (o[0], len(o[2]), o[1]))
        return opts

    def _connect_blocks(self, nodes, multi, declared: set[int], ctx: _ComboContext):
        """Connect every multi-node block inside the portal graph; the blocks
        must come out vertex-disjoint so the realized connectivity matches the
        intended grouping.  Free routing is tried first; on pass-through
        contention, sequential routing with consumed vertices (two orders)."""
        vert_set = set(ctx.verts)

        def portals_of(blk: frozenset[int]) -> set[int]:
            out: set[int] = set()
            for k in blk:
                out |= nodes[k][2]
            return out

        def attempt(order, consume: bool):
            banned: set[int] = set()
            all_edges: set[tuple[int, int]] = set()
            all_used: set[int] = set()
            total = 0
            pass_used: list[frozenset[int]] = []
            for blk in order:
                own = portals_of(blk)
                allowed = frozenset((vert_set - (declared - own) - banned) | own)
                parts = [nodes[k][2] for k in sorted(blk)]
                res = ctx.steiner(parts, allowed)
                if res is None:
                    return None
                c, es, used = res
                total += c
                all_edges.update(es)
                all_used |= used
                pt = used - declared
                pass_used.append(pt)
                if consume:
                    banned |= pt
            if not consume:
                seen: set[int] = set()
                for pt in pass_used:
                    if pt & seen:
                        return None
                    seen |= pt
            return tuple(sorted(all_edges)), total, frozenset(all_used)

        routed = attempt(multi, consume=False)
        if routed is not None:
            return routed
        for order in (multi, list(reversed(multi))):
            routed = attempt(order, consume=True)
            if routed is not None:
                return routed
        self.stats.flags.add("disjoint_routing")
        return None

    # ------------------------------------------------------ entry derivation

    def _derive_entries(
        self, cid, picks, node_key, node_group, group_portals,
        att_keys, promise_keys, child_values, touched_base,
        g_edges, g_cost, table, is_root, portal_c,
        pairs_cross, isolated,
    ) -> None:
        caps = self.caps
        part_gids = set(node_group.values())

        att: dict[int, set[int]] = {
            t: {node_group[k] for k in ks} for t, ks in att_keys.items()
        }

        required: set[int] = set()
        forwards: list[frozenset[int]] = []
        for a, b in pairs_cross:
            ga, gb = att[a], att[b]
            if ga & gb:
                continue
            if is_root:
                return
            required |= ga | gb
            forwards.append(frozenset(ga | gb))
        for a in isolated:
            required |= att[a]
        for pk in promise_keys:
            gids = {node_group[k] for k in pk}
            if len(gids) == 1:
                continue
            if is_root:
                return
            required |= gids
            forwards.append(frozenset(gids))

        pools: dict[int, tuple[int, ...]] = {}
        for gid in sorted(required):
            pool = tuple(sorted(group_portals.get(gid, set()) & portal_c))
            if not pool:
                return
            pools[gid] = pool

        if is_root:
            r_choices: list[tuple[int, ...]] = [()]
        else:
            per_req = []
            for gid in sorted(required):
                pool = pools[gid]
                opts = [pool]
                if len(pool) > 1:
                    opts.append((pool[0],))
                per_req.append(opts)
            optional: list[tuple[int, ...]] = []
            for gid in sorted(part_gids - required):
                pool = tuple(sorted(group_portals[gid] & portal_c))
                if len(pool) >= 2:
                    optional.append(pool)
            if len(optional) > caps.max_optional_groups:
                self.stats.flags.add("optional_cap")
                optional = optional[: caps.max_optional_groups]
            r_choices = []
            seen_r: set[tuple[int, ...]] = set()
            for req_pick in (product(*per_req) if per_req else [()]):
                for nopt in range(0, len(optional) + 1):
                    for sub in combinations(optional, nopt):
                        r: set[int] = set()
                        for chunk in req_pick:
                            r.update(chunk)
                        for pool in sub:
                            r.update(pool)
                        rt = tuple(sorted(r))
                        if rt not in seen_r:
                            seen_r.add(rt)
                            r_choices.append(rt)

        touched = frozenset(touched_base | {v for e in g_edges for v in e})

        for r in r_choices:
            if len(r) > caps.r_cap:
                self.stats.flags.add("r_cap")
                continue
            rset = set(r)
            repped = {gid for gid in part_gids if group_portals[gid] & rset}
            if not set(pools) <= repped:
                continue
            y_parts = _canon_parts(
                tuple(sorted(group_portals[gid] & rset)) for gid in sorted(repped)
            )
            part_index = {part: i for i, part in enumerate(y_parts)}
            gid_to_part = {
                gid: part_index[tuple(sorted(group_portals[gid] & rset))]
                for gid in repped
            }
            base_merge = _Dsu(range(len(y_parts)))
            for fw in forwards:
                pins = sorted({gid_to_part[g] for g in fw})
                for x in pins[1:]:
                    base_merge.union(pins[0], x)
            base_groups = [sorted(g) for g in base_merge.groups().values()]

            self._emit_variants(
                cid, picks, node_key, node_group, repped, gid_to_part,
                y_parts, base_groups, r, g_edges, g_cost, child_values,
                touched, table, is_root, portal_c,
            )

    def _emit_variants(
        self, cid, picks, node_key, node_group, repped, gid_to_part,
        y_parts, base_groups, r, g_edges, g_cost, child_values,
        touched, table, is_root, portal_c,
    ) -> None:
        dec, caps = self.dec, self.caps
        forced: list[int] = []
        for i, (e, meta) in enumerate(picks):
            for u in e.bas:
                ext = False
                for (rc, _, parts) in meta.regions:
                    if not dec.is_descendant(rc, u):
                        continue
                    if any(node_group[node_key[(i, pi)]] in repped for pi in parts):
                        ext = True
                        break
                if ext:
                    forced.append(u)
        forced = sorted(set(forced))
        if len(forced) > caps.max_forced_cells:
            self.stats.flags.add("cell_variants")
            variant_iter: Iterable[tuple[int, ...]] = [
                (0,) * len(forced), (1,) * len(forced)
            ]
        else:
            variant_iter = product((0, 1), repeat=len(forced))

        allowed_centers = self._candidates(cid)
        for lifts in variant_iter:
            bas: set[int] = set()
            for u, lift in zip(forced, lifts):
                if lift:
                    parent = dec.cluster(u).parent
                    bas.add(parent if parent is not None else u)
                else:
                    bas.add(u)
            nbas: set[int] = set()
            for e in bas:
                if e == cid:
                    continue
                parent = dec.cluster(e).parent
                if parent is None:
                    continue
                for sib in dec.children(parent):
                    if sib != e and sib not in bas:
                        nbas.add(sib)
            cells_all = bas | nbas
            if len(cells_all) > caps.rho_cap:
                self.stats.flags.add("rho_cap")
                continue
            if not all(
                e == cid or dec.cluster(e).center in allowed_centers for e in cells_all
            ):
                continue

            regions = disjointify(dec, cells_all) if cells_all else []
            g_map: dict[int, set[int]] = {reg.inducing: set() for reg in regions}
            for i, (e, meta) in enumerate(picks):
                for (_, pts, parts) in meta.regions:
                    if not pts:
                        continue
                    target = None
                    for reg in regions:
                        if pts <= reg.points:
                            target = reg.inducing
                            break
                    if target is None:
                        continue
                    for pi in parts:
                        gid = node_group[node_key[(i, pi)]]
                        if gid in repped:
                            g_map[target].add(gid_to_part[gid])

            merge = _Dsu(range(len(y_parts)))
            for grp in base_groups:
                for x in grp[1:]:
                    merge.union(grp[0], x)
            for reg_parts in g_map.values():
                lst = sorted(reg_parts)
                for x in lst[1:]:
                    merge.union(lst[0], x)
            p_final = _canon_parts(sorted(g) for g in merge.groups().values())

            g_tuple = tuple(
                (reg.inducing, tuple(sorted(g_map[reg.inducing])))
                for reg in sorted(regions, key=lambda rg: rg.inducing)
            )
            sealed = () if is_root else tuple(sorted((set(touched) & portal_c) - set(r)))
            entry = Entry(
                cluster=cid,
                r=tuple(r),
                y=y_parts,
                bas=tuple(sorted(bas)),
                nbas=tuple(sorted(nbas)),
                g=g_tuple,
                p=p_final,
                sealed=sealed,
            )
            value = child_values + g_cost
            prev = table.get(entry)
            if prev is not None and prev.value <= value:
                continue
            table[entry] = EntryMeta(
                value=value,
                children=tuple(e for e, _ in picks),
                g_edges=tuple(g_edges),
                touched=touched,
                regions=tuple(
                    (reg.inducing, reg.points, tuple(sorted(g_map[reg.inducing])))
                    for reg in sorted(regions, key=lambda rg: rg.inducing)
                ),
            )

    # ---------------------------------------------------------- extraction

    def extract_solution(self) -> Forest:
        if not self._solved:
            self.solve()
        if self._final_value is None:
            raise MissingBackPointerError("final entry has no finite value")
        edges: list[tuple[int, int]] = []

        def walk(entry: Entry) -> None:
            meta = self.tables[entry.cluster].get(entry)
            if meta is None:
                raise MissingBackPointerError(
                    f"no stored state for cluster {entry.cluster}"
                )
            edges.extend(meta.g_edges)
            for ch in meta.children:
                walk(ch)

        walk(self.final_entry())
        forest = Forest.from_edges(self.metric, edges)
        assert forest.weight() == self._final_value, "extraction must match the value"
        assert is_feasible(forest.edges, self.inst), "extracted forest must be feasible"
        return forest


# ------------------------------------------------------------------ module ops


def base_entries(dp: SparseDp) -> list[Entry]:
    return [dp._base_entry(cid)[0] for cid in dp.dec.height_clusters(0)]


def eval_value(dp: SparseDp, entry: Entry) -> int | None:
    dp.solve()
    meta = dp.tables.get(entry.cluster, {}).get(entry)
    return None if meta is None else meta.value


def enumerate_candidates(dp: SparseDp, cid: int) -> list[tuple[Entry, EntryMeta]]:
    dp.solve()
    return sorted(
        dp.tables.get(cid, {}).items(), key=lambda kv: (kv[1].value, kv[0].r, kv[0].y)
    )


def internal_constraints_ok(dec: Decomposition, entry: Entry, params: CellParams) -> bool:
    """Entry-local sanity: y partitions r; cells are sub-clusters with the
    sibling closure and admissible centers; g covers exactly the regions of
    the cell family, each attachment inside one promise part; p partitions
    the parts of y."""
    if list(entry.r) != sorted(set(entry.r)):
        return False
    if not set(entry.r) <= set(dec.portals(entry.cluster)):
        return False
    seen: set[int] = set()
    for part in entry.y:
        if not part or list(part) != sorted(part):
            return False
        if seen & set(part):
            return False
        seen |= set(part)
    if seen != set(entry.r):
        return False
    if entry.y != _canon_parts(entry.y):
        return False

    cells_all = set(entry.bas) | set(entry.nbas)
    if set(entry.bas) & set(entry.nbas):
        return False
    allowed = set(candidate_centers(dec, entry.cluster, params))
    for e in cells_all:
        if not dec.is_descendant(e, entry.cluster):
            return False
        if e != entry.cluster and dec.cluster(e).center not in allowed:
            return False
        if e == entry.cluster:
            continue
        parent = dec.cluster(e).parent
        if parent is None:
            continue
        for sib in dec.children(parent):
            if sib != e and sib not in cells_all:
                return False

    regions = disjointify(dec, cells_all) if cells_all else []
    domain = tuple(sorted(reg.inducing for reg in regions))
    if tuple(sorted(cid for cid, _ in entry.g)) != domain:
        return False
    part_of = {}
    for qi, q in enumerate(entry.p):
        for x in q:
            part_of[x] = qi
    if sorted(part_of) != list(range(len(entry.y))):
        return False
    if entry.p != _canon_parts(entry.p):
        return False
    for _, attach in entry.g:
        if list(attach) != sorted(set(attach)):
            return False
        if any(x >= len(entry.y) for x in attach):
            return False
        if len({part_of[x] for x in attach}) > 1:
            return False
    if list(entry.sealed) != sorted(set(entry.sealed)):
        return False
    if set(entry.sealed) & set(entry.r):
        return False
    return True


def consistency_check(
    dec: Decomposition,
    parent: Entry,
    children: Sequence[Entry],
    g_edges: Sequence[tuple[int, int]],
    pairs: Sequence[tuple[int, int]],
) -> bool:
    """The nine-step compatibility test between a parent state and one state
    per child, given the cross-child edges used at this level.  Judges the
    stated claims only; the solver constructs entries that satisfy it by
    design, tests probe it directly."""
    child_ids = dec.children(parent.cluster)
    if len(children) != len(child_ids):
        return False
    for ce, ch in zip(children, child_ids):
        if ce.cluster != ch:
            return False
    members = dec.cluster(parent.cluster).members
    height = dec.cluster(parent.cluster).height

    # step 1: the children and their portals tile the cluster
    union: set[int] = set()
    for ce in children:
        union |= set(dec.cluster(ce.cluster).members) | set(ce.r)
    if union != set(members) | set(parent.r):
        return False

    # step 2: merged connectivity, restricted to R, must equal parent.y
    all_declared: set[int] = set()
    for ce in children:
        all_declared |= set(ce.r)
    for a, b in g_edges:
        if a not in all_declared or b not in all_declared:
            return False
    dsu = _Dsu(sorted(all_declared))
    for ce in children:
        for part in ce.y:
            for p in part[1:]:
                dsu.union(part[0], p)
    for a, b in g_edges:
        dsu.union(a, b)
    merged = sorted(dsu.groups().values(), key=min)
    rset = set(parent.r)
    if _canon_parts(tuple(sorted(g & rset)) for g in merged) != parent.y:
        return False
    class_of: dict[int, int] = {}
    for gi, g in enumerate(merged):
        for p in g:
            class_of[p] = gi

    # step 3: every basic cell refines to some child's basic cell
    for e in parent.bas:
        ok = False
        for ce in children:
            for ep in ce.bas:
                if ep == e or dec.cluster(ep).parent == e:
                    ok = True
                    break
            if ok:
                break
        if not ok:
            return False

    # step 4: every non-basic cell is visible below, directly or via children
    below: set[int] = set()
    for ce in children:
        below |= set(ce.bas) | set(ce.nbas)
    for e in parent.nbas:
        if e in below:
            continue
        kids = dec.children(e)
        if not kids or not all(k in below for k in kids):
            return False

    def entry_regions(e: Entry):
        cells_all = set(e.bas) | set(e.nbas)
        return disjointify(dec, cells_all) if cells_all else []

    def g_of(e: Entry) -> dict[int, tuple[int, ...]]:
        return {cid: attach for cid, attach in e.g}

    parent_part_index = {part: i for i, part in enumerate(parent.y)}

    def fwd(ce: Entry, attach: tuple[int, ...]) -> set[int]:
        """Parent part indices of merged classes meeting the attached child
        parts and surviving the restriction to R."""
        out: set[int] = set()
        for pi in attach:
            part = ce.y[pi]
            cls = merged[class_of[part[0]]]
            cut = tuple(sorted(cls & rset))
            if cut:
                out.add(parent_part_index[cut])
        return out

    child_regions = [entry_regions(ce) for ce in children]
    child_gs = [g_of(ce) for ce in children]

    # step 5: externally connected child basics must persist (or lift)
    for ci, ce in enumerate(children):
        for u in ce.bas:
            u_members = dec.cluster(u).members
            needs = False
            for reg in child_regions[ci]:
                if not reg.points <= u_members:
                    continue
                if fwd(ce, child_gs[ci].get(reg.inducing, ())):
                    needs = True
                    break
            if needs:
                if not any(
                    u == up or dec.cluster(u).parent == up for up in parent.bas
                ):
                    return False

    # step 6: parent attachments are exactly the aggregated child forwards
    parent_regions = entry_regions(parent)
    parent_g = g_of(parent)
    for reg in parent_regions:
        agg: set[int] = set()
        for ci, ce in enumerate(children):
            for reg2 in child_regions[ci]:
                if reg2.points and reg2.points <= reg.points:
                    agg |= fwd(ce, child_gs[ci].get(reg2.inducing, ()))
        if agg != set(parent_g.get(reg.inducing, ())):
            return False

    part_of_parent = {}
    for qi, q in enumerate(parent.p):
        for x in q:
            part_of_parent[x] = qi

    # step 7: child promises either realized here or forwarded in one promise
    for ci, ce in enumerate(children):
        for q in ce.p:
            for xa, xb in combinations(sorted(q), 2):
                pa, pb = ce.y[xa], ce.y[xb]
                if class_of[pa[0]] == class_of[pb[0]]:
                    continue
                ia = fwd(ce, (xa,))
                ib = fwd(ce, (xb,))
                if not ia or not ib:
                    return False
                if len({part_of_parent[x] for x in ia | ib}) > 1:
                    return False

    def region_of(ci: int, point: int):
        for reg in child_regions[ci]:
            if point in reg.points:
                return reg
        return None

    idx_of_child = {ch: i for i, ch in enumerate(child_ids)}

    # step 8: demanding pairs split across children are connected or forwarded
    for a, b in pairs:
        if a not in members or b not in members:
            continue
        ca = dec.cluster_at(a, height - 1)
        cb = dec.cluster_at(b, height - 1)
        if ca == cb:
            continue
        ci, cj = idx_of_child[ca], idx_of_child[cb]
        ra, rb = region_of(ci, a), region_of(cj, b)
        if ra is None or rb is None:
            return False
        atta = child_gs[ci].get(ra.inducing, ())
        attb = child_gs[cj].get(rb.inducing, ())
        classes_a = {class_of[children[ci].y[pi][0]] for pi in atta}
        classes_b = {class_of[children[cj].y[pi][0]] for pi in attb}
        if classes_a & classes_b:
            continue
        fa = fwd(children[ci], atta)
        fb = fwd(children[cj], attb)
        if not fa or not fb:
            return False
        if len({part_of_parent[x] for x in fa | fb}) > 1:
            return False

    # step 9: terminals whose partner lives outside must be forwarded
    for a, b in pairs:
        for t, o in ((a, b), (b, a)):
            if t not in members or o in members:
                continue
            found = False
            for ci, ce in enumerate(children):
                reg = region_of(ci, t)
                if reg is None:
                    continue
                if fwd(ce, child_gs[ci].get(reg.inducing, ())):
                    found = True
                    break
            if not found:
                return False
    return True


# ------------------------------------------------------------- witness fitting


@dataclass
class FitReport:
    fits: bool
    reasons: list[str]


def witness_fits(
    forest: Forest,
    dec: Decomposition,
    instance: SfpInstance,
    caps: DpCaps,
    params: CellParams,
) -> FitReport:
    """Conservative test of whether a concrete portal-respecting forest is
    representable inside the DP caps: per-level cross-child edge budget,
    per-cluster active-portal budget (components expanded to their full
    portal sets), claimed-part counts, transit-group counts, and the cell
    budget after the sibling closure."""
    reasons: list[str] = []
    if not is_portal_respecting(forest, dec):
        return FitReport(False, ["forest is not portal-respecting"])
    demanding = {t for p in instance.demanding_pairs for t in p.as_tuple()}

    owned: dict[int, list[tuple[int, int]]] = {}
    for a, b in forest.edges:
        t = dec.divergence_height(a, b)
        if t < 0:
            continue
        owner = dec.cluster_at(a, t + 1)
        owned.setdefault(owner, []).append((a, b))

    for cid in sorted(owned):
        es = owned[cid]
        h = dec.cluster(cid).height
        if len(es) > caps.edge_cap:
            reasons.append(f"cluster {cid}: {len(es)} cross-child edges > {caps.edge_cap}")
        cap = 4 * dec.hier.scale_ticks(h)
        for a, b in es:
            if dec.metric.dist(a, b) > cap:
                reasons.append(f"cluster {cid}: edge ({a},{b}) longer than four scales")

    n_parts_by_parent: dict[int, int] = {}
    for cid in range(len(dec.clusters)):
        mem = dec.cluster(cid).members
        if len(mem) == dec.metric.n:
            continue  # the root has no boundary to cross
        crossing = set()
        for a, b in forest.edges:
            if (a in mem) != (b in mem):
                crossing.add(a if a in mem else b)
        if not crossing:
            continue
        dsu = _Dsu(sorted(mem))
        for a, b in forest.edges:
            if a in mem and b in mem:
                dsu.union(a, b)
        comp_of: dict[int, set[int]] = {}
        for p in sorted(crossing):
            comp_of.setdefault(dsu.find(p), set()).add(p)
        portals = set(dec.portals(cid))
        r_full: set[int] = set()
        transit = 0
        for root in sorted(comp_of):
            comp = {x for x in mem if dsu.find(x) == root}
            cohort = comp & portals
            r_full |= cohort if cohort else comp_of[root]
            if not comp & demanding and len(cohort) >= 2:
                transit += 1
        if len(r_full) > caps.r_cap:
            reasons.append(f"cluster {cid}: {len(r_full)} active portals > {caps.r_cap}")
        if transit > caps.max_optional_groups:
            reasons.append(
                f"cluster {cid}: {transit} transit groups > {caps.max_optional_groups}"
            )
        parent = dec.cluster(cid).parent
        if parent is not None:
            n_parts_by_parent[parent] = n_parts_by_parent.get(parent, 0) + len(comp_of)

    for cid, np_ in sorted(n_parts_by_parent.items()):
        if np_ > caps.max_parts:
            reasons.append(f"cluster {cid}: {np_} claimed parts > {caps.max_parts}")

    assignment = compute_assignment(dec, forest, params)
    for cid, cc in sorted(assignment.per_cluster.items()):
        load = len(cc.bas | cc.nbas)
        if load > caps.rho_cap:
            reasons.append(f"cluster {cid}: {load} cells > {caps.rho_cap}")

    return FitReport(not reasons, reasons)
