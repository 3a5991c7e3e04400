"""Reference solvers: exact optima at desk scale and a primal-dual baseline.

``brute_force_forest`` computes true optima by enumerating set partitions of
the demand bundles and solving each group exactly with Dreyfus-Wagner; it is
the ground truth the approximation pipeline is measured against.
``subset_mst_forest_cost`` recomputes the same value by a completely
different route (minimum spanning trees over vertex subsets) so tests can
cross-check the oracle itself.  ``primal_dual_forest`` is the classic
moat-growing 2-approximation with reverse deletion, run on terminals only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import BudgetExceededError
from .forest import Forest
from .instance import SfpInstance, is_feasible
from .metric import MetricSpace


@dataclass
class OracleBudget:
    """Hard limits for the exact solvers; exceeding any raises."""

    max_terminals: int = 14
    max_steiner_pool: int = 16
    time_cap_s: float = 120.0


@dataclass
class OracleResult:
    forest: Forest
    cost: int
    optimal: bool
    partitions_tried: int


class _Dsu:
    def __init__(self, items: Iterable[int]):
        self.parent = {x: x for x in items}

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def mst_forest(metric: MetricSpace, vertices: Sequence[int]) -> Forest:
    """Kruskal over the complete graph on ``vertices``; ties are broken by
    (weight, smaller endpoint, larger endpoint) so the tree is deterministic."""
    verts = sorted(set(vertices))
    edges = sorted(
        (metric.dist(a, b), a, b) for a, b in combinations(verts, 2)
    )
    dsu = _Dsu(verts)
    keep = []
    for w, a, b in edges:
        if dsu.union(a, b):
            keep.append((a, b))
    return Forest.from_edges(metric, keep)


def demand_bundles(inst: SfpInstance) -> list[frozenset[int]]:
    """Connected components of the demand graph (terminals joined by pairs)."""
    pairs = inst.demanding_pairs
    dsu = _Dsu({t for p in pairs for t in (p.a, p.b)})
    for p in pairs:
        dsu.union(p.a, p.b)
    groups: dict[int, set[int]] = {}
    for t in dsu.parent:
        groups.setdefault(dsu.find(t), set()).add(t)
    return sorted((frozenset(g) for g in groups.values()), key=min)


def set_partitions(n: int) -> Iterator[list[list[int]]]:
    """All partitions of range(n), generated via restricted growth strings."""
    if n == 0:
        yield []
        return
    code = [0] * n

    def emit() -> list[list[int]]:
        blocks: dict[int, list[int]] = {}
        for i, c in enumerate(code):
            blocks.setdefault(c, []).append(i)
        return [blocks[c] for c in sorted(blocks)]

    while True:
        yield emit()
        i = n - 1
        while i > 0:
            cap = max(code[:i]) + 1
            if code[i] < cap:
                code[i] += 1
                for j in range(i + 1, n):
                    code[j] = 0
                break
            i -= 1
        else:
            return


def dreyfus_wagner(
    metric: MetricSpace,
    terminals: Sequence[int],
    steiner_pool: Sequence[int],
) -> tuple[int, tuple[tuple[int, int], ...]]:
    """Exact minimum Steiner tree connecting ``terminals`` using vertices
    drawn from ``terminals`` + ``steiner_pool``; returns (cost, edges)."""
    terms = sorted(set(terminals))
    if len(terms) <= 1:
        return 0, ()
    verts = sorted(set(steiner_pool) | set(terms))
    d = {(a, b): metric.dist(a, b) for a in verts for b in verts}
    rest = terms[1:]
    # f[(D, v)] = cost of the cheapest tree spanning D | {v}; payload records
    # the step taken so the edge set can be rebuilt afterwards.
    f: dict[tuple[frozenset[int], int], tuple[int, tuple]] = {}
    for q in rest:
        for v in verts:
            f[(frozenset([q]), v)] = (d[(v, q)], ("direct", q))
    for size in range(2, len(rest) + 1):
        for combo in combinations(rest, size):
            dset = frozenset(combo)
            anchor = min(dset)
            others = sorted(dset - {anchor})
            # g[(dset, u)] = cheapest tree spanning dset | {u} in which u is a
            # terminal of dset or a branching point.
            g: dict[int, tuple[int, tuple]] = {}
            for u in verts:
                best: tuple[int, tuple] | None = None
                if u in dset:
                    sub = f[(dset - {u}, u)]
                    best = (sub[0], ("absorb",))
                for r in range(0, len(others)):
                    for pick in combinations(others, r):
                        e_half = frozenset((anchor,) + pick)
                        if e_half == dset:
                            continue
                        cand = f[(e_half, u)][0] + f[(dset - e_half, u)][0]
                        if best is None or cand < best[0]:
                            best = (cand, ("split", e_half))
                if best is not None:
                    g[u] = best
            for v in verts:
                best_f: tuple[int, tuple] | None = None
                for u in verts:
                    if u not in g:
                        continue
                    cand = d[(v, u)] + g[u][0]
                    if best_f is None or cand < best_f[0]:
                        best_f = (cand, ("via", u, g[u][1]))
                assert best_f is not None
                f[(dset, v)] = best_f

    edges: set[tuple[int, int]] = set()

    def unwind(dset: frozenset[int], v: int) -> None:
        cost, step = f[(dset, v)]
        if step[0] == "direct":
            q = step[1]
            if q != v:
                edges.add((min(v, q), max(v, q)))
            return
        _, u, inner = step
        if u != v:
            edges.add((min(v, u), max(v, u)))
        if inner[0] == "absorb":
            unwind(dset - {u}, u)
        else:
            e_half = inner[1]
            unwind(e_half, u)
            unwind(dset - e_half, u)

    full = frozenset(rest)
    unwind(full, terms[0])
    return f[(full, terms[0])][0], tuple(sorted(edges))


def brute_force_forest(
    inst: SfpInstance,
    steiner_pool: Sequence[int] | None = None,
    budget: OracleBudget | None = None,
) -> OracleResult:
    """Exact optimum by minimizing, over all partitions of the demand bundles,
    the total cost of one exact Steiner tree per partition class."""
    budget = budget or OracleBudget()
    bundles = demand_bundles(inst)
    if not bundles:
        return OracleResult(Forest.from_edges(inst.metric, []), 0, True, 0)
    all_terms = sorted({t for g in bundles for t in g})
    pool = sorted(set(steiner_pool) if steiner_pool is not None else set(inst.metric.points()))
    pool = [p for p in pool if p not in set(all_terms)]
    if len(all_terms) > budget.max_terminals:
        raise BudgetExceededError(f"{len(all_terms)} terminals exceed oracle cap {budget.max_terminals}")
    if len(pool) > budget.max_steiner_pool:
        raise BudgetExceededError(f"steiner pool {len(pool)} exceeds oracle cap {budget.max_steiner_pool}")
    deadline = time.monotonic() + budget.time_cap_s
    best: tuple[int, tuple[tuple[int, int], ...]] | None = None
    tried = 0
    tree_cache: dict[frozenset[int], tuple[int, tuple[tuple[int, int], ...]]] = {}
    for partition in set_partitions(len(bundles)):
        tried += 1
        if time.monotonic() > deadline:
            raise BudgetExceededError("oracle time cap exceeded")
        total = 0
        group_edges: list[tuple[int, int]] = []
        for block in partition:
            terms = frozenset().union(*(bundles[i] for i in block))
            if terms not in tree_cache:
                tree_cache[terms] = dreyfus_wagner(inst.metric, sorted(terms), pool)
            cost, edges = tree_cache[terms]
            total += cost
            group_edges.extend(edges)
        key = (total, tuple(sorted(set(group_edges))))
        if best is None or key < best:
            best = key
    assert best is not None
    forest = Forest.from_edges(inst.metric, best[1])
    assert is_feasible(forest.edges, inst)
    assert forest.weight() == best[0], "partition optimum must equal its forest weight"
    return OracleResult(forest=forest, cost=best[0], optimal=True, partitions_tried=tried)


def _prim_cost(d: np.ndarray) -> int:
    n = d.shape[0]
    if n <= 1:
        return 0
    best = d[0].copy()
    best[0] = -1
    total = 0
    for _ in range(n - 1):
        masked = np.where(best >= 0, best, np.iinfo(np.int64).max)
        j = int(masked.argmin())
        total += int(masked[j])
        best = np.where((d[j] < best) & (best >= 0), d[j], best)
        best[j] = -1
    return total


def subset_mst_forest_cost(
    inst: SfpInstance,
    steiner_pool: Sequence[int] | None = None,
    budget: OracleBudget | None = None,
) -> int:
    """Independent recomputation of the optimum: for every partition of the
    demand bundles and every subset of the Steiner pool, take the MST of the
    group terminals plus the subset.  Small and slow on purpose; shares no
    code with the Dreyfus-Wagner path."""
    budget = budget or OracleBudget()
    bundles = demand_bundles(inst)
    if not bundles:
        return 0
    all_terms = {t for g in bundles for t in g}
    pool = sorted(set(steiner_pool) if steiner_pool is not None else set(inst.metric.points()))
    pool = [p for p in pool if p not in all_terms]
    if len(pool) > budget.max_steiner_pool:
        raise BudgetExceededError("steiner pool too large for subset check")
    mat = inst.metric.matrix()
    deadline = time.monotonic() + budget.time_cap_s

    def steiner_cost(terms: frozenset[int]) -> int:
        if len(terms) <= 1:
            return 0
        best = None
        base = sorted(terms)
        for r in range(0, len(pool) + 1):
            for extra in combinations(pool, r):
                idx = np.array(base + list(extra), dtype=np.int64)
                c = _prim_cost(mat[np.ix_(idx, idx)])
                if best is None or c < best:
                    best = c
        return int(best)

    cache: dict[frozenset[int], int] = {}
    best_total = None
    for partition in set_partitions(len(bundles)):
        if time.monotonic() > deadline:
            raise BudgetExceededError("subset check time cap exceeded")
        total = 0
        for block in partition:
            terms = frozenset().union(*(bundles[i] for i in block))
            if terms not in cache:
                cache[terms] = steiner_cost(terms)
            total += cache[terms]
        if best_total is None or total < best_total:
            best_total = total
    return int(best_total)


def primal_dual_forest(inst: SfpInstance) -> Forest:
    """Moat-growing 2-approximation with synchronized dual growth and reverse
    deletion.  Uses terminal points only; all potentials are exact Fractions,
    so event ordering is deterministic."""
    pairs = inst.demanding_pairs
    if not pairs:
        return Forest.from_edges(inst.metric, [])
    verts = sorted({t for p in pairs for t in (p.a, p.b)})
    m = inst.metric
    partners: dict[int, list[int]] = {v: [] for v in verts}
    for p in pairs:
        partners[p.a].append(p.b)
        partners[p.b].append(p.a)
    comp_of = {v: v for v in verts}
    members: dict[int, list[int]] = {v: [v] for v in verts}
    pot = {v: Fraction(0) for v in verts}
    added: list[tuple[int, int]] = []

    def comp_active(cid: int) -> bool:
        return any(comp_of[q] != cid for v in members[cid] for q in partners[v])

    while True:
        active = {cid: comp_active(cid) for cid in members}
        if not any(active.values()):
            break
        best: tuple[Fraction, int, int] | None = None
        for a, b in combinations(verts, 2):
            ca, cb = comp_of[a], comp_of[b]
            if ca == cb:
                continue
            rate = int(active[ca]) + int(active[cb])
            if rate == 0:
                continue
            slack = m.dist(a, b) - pot[a] - pot[b]
            if slack < 0:
                slack = Fraction(0)
            cand = (slack / rate, a, b)
            if best is None or cand < best:
                best = cand
        assert best is not None, "active component with no cross-component pair"
        delta, a, b = best
        for v in verts:
            if active[comp_of[v]]:
                pot[v] += delta
        ca, cb = comp_of[a], comp_of[b]
        keep, drop = (ca, cb) if ca < cb else (cb, ca)
        for v in members[drop]:
            comp_of[v] = keep
        members[keep].extend(members.pop(drop))
        added.append((a, b))

    kept = list(added)
    for e in reversed(added):
        trial = [x for x in kept if x != e]
        if is_feasible(trial, inst):
            kept = trial
    return Forest.from_edges(inst.metric, kept)
