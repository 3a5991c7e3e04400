"""End-to-end solver: sparsity-guided recursion over the decompose-and-DP core.

The pipeline rescales the instance onto a coarse net, then walks a simple
recursion: if no ball in the net hierarchy sees more than a threshold amount
of demand (measured by a cheap primal-dual heuristic), the instance is sparse
enough for the dynamic program and we take the best forest over a handful of
independently randomized decompositions.  Otherwise we pick the smallest
critical ball, choose a split radius whose heuristic weight is locally
stable, cut the instance at a randomly shifted radius, solve the inside with
the DP and the outside recursively, and stitch the two forests back together
with short snap edges.

Every recursion node asserts feasibility of the forest it returns, so a run
either produces a valid forest or dies loudly; quality escapes (cap
truncation, budget exhaustion, fallbacks) are reported as flags instead.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .baselines import OracleBudget, brute_force_forest, primal_dual_forest
from .cells import CellParams
from .decomposition import DecompositionParams, build_decomposition
from .dp import DpCaps, SparseDp
from .errors import BudgetExceededError, DegenerateInstanceError
from .forest import Forest, make_net_respecting
from .instance import (
    BallParams,
    SfpInstance,
    TerminalPair,
    auxiliary_subinstance,
    is_feasible,
    split_critical,
)
from .metric import NetHierarchy, build_hierarchy, rescale_instance


@dataclass(frozen=True)
class DriverConfig:
    """Knobs for one pipeline run.

    ``sparsity_q0`` is the demand-density cutoff: a net ball is critical when
    its heuristic weight exceeds ``sparsity_q0`` times the ball scale.  When
    left unset it is calibrated from a warm-up scan (median positive density
    times ``q0_factor``).  ``base_case_pairs``/``base_case_points`` bound the
    instances handed straight to the exact oracle.
    """

    eps: float = 0.5
    dim_bound: int = 2
    scale: int = 4
    sparsity_q0: float | None = None
    q0_factor: float = 4.0
    n_trials: int = 8
    caps: DpCaps = field(default_factory=DpCaps)
    base_case_pairs: int = 3
    base_case_points: int = 14
    mode: str = "practical"
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie strictly between 0 and 1")
        if self.scale < 2:
            raise ValueError("scale must be at least 2")
        if self.mode not in ("practical", "theory"):
            raise ValueError("mode must be 'practical' or 'theory'")
        if self.mode == "theory" and self.scale < 4:
            raise ValueError("theory mode needs scale >= 4")
        if self.sparsity_q0 is not None and self.sparsity_q0 <= 0:
            raise ValueError("sparsity_q0 must be positive when given")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.dim_bound < 1:
            raise ValueError("dim_bound must be at least 1")

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "dim_bound": self.dim_bound,
            "scale": self.scale,
            "sparsity_q0": self.sparsity_q0,
            "q0_factor": self.q0_factor,
            "n_trials": self.n_trials,
            "caps": self.caps.to_json(),
            "base_case_pairs": self.base_case_pairs,
            "base_case_points": self.base_case_points,
            "mode": self.mode,
            "seed": self.seed,
        }


def theory_scale(n_points: int, dim_bound: int, growth: int = 2) -> int:
    """Net scale the analysis regime would use: (log2 n)^(growth/k), floored
    at 4.  Documentation of the asymptotic choice only -- the pipeline always
    takes its scale from the config."""
    k = max(1, dim_bound)
    val = math.log2(max(2, n_points)) ** (growth / k)
    return max(4, int(round(val)))


def theory_sparsity_threshold(scale: int, dim_bound: int, eps: float) -> float:
    """Demand-density cutoff magnitude (scale * k / eps)^k from the analysis
    regime, with all hidden constants set to one.  Documentation only; runs
    calibrate the cutoff empirically or take it from the config."""
    k = max(1, dim_bound)
    return float(scale * k / eps) ** k


@dataclass(frozen=True)
class HeuristicValue:
    """Weight of the cheap upper bound for the demand crossing one net ball."""

    level: int
    center: int
    radius_factor: int
    value: int  # ticks


def ball_heuristic(
    inst: SfpInstance,
    hier: NetHierarchy,
    level: int,
    center: int,
    radius_factor: int,
    eps: float,
    dim_bound: int,
) -> HeuristicValue:
    """Primal-dual weight of the ball sub-instance at ``center``, rewritten
    net-respecting so it measures what the ball contributes at this scale.

    The value sandwiches the sub-instance optimum: it is feasible for the
    snapped demand, hence at least the optimum, and the primal-dual guarantee
    plus the net-respecting rewrite keep it within a 2(1 + O(eps)) factor.
    """
    if not hier.in_net(center, level):
        raise ValueError(f"point {center} is not in the level-{level} net")
    if radius_factor < 1:
        raise ValueError("radius_factor must be at least 1")
    sub = auxiliary_subinstance(
        inst, hier, level, center, radius_factor, BallParams.from_eps(eps, dim_bound)
    )
    if not sub.demanding_pairs:
        return HeuristicValue(level, center, radius_factor, 0)
    grown = primal_dual_forest(sub)
    if not grown.edges:
        return HeuristicValue(level, center, radius_factor, 0)
    value = make_net_respecting(grown, hier, e_nr=eps).weight()
    return HeuristicValue(level, center, radius_factor, value)


def _scan_levels(hier: NetHierarchy) -> range:
    # Level 0 is the whole point set at unit radius; criticality there would
    # fire on any pair of nearby terminals, so the scan starts at level 1.
    return range(1, hier.num_levels)


def sparsity_scan(
    inst: SfpInstance,
    hier: NetHierarchy,
    threshold: Fraction,
    eps: float,
    dim_bound: int,
) -> tuple[int, int] | None:
    """Find the smallest level carrying a critical ball, or None if every
    ball's heuristic weight stays below ``threshold`` times its scale.

    Within the critical level the ball with the largest heuristic value wins;
    ties go to the smallest point id.
    """
    for level in _scan_levels(hier):
        best: tuple[int, int] | None = None  # (-value, center) for min()
        cutoff = threshold * hier.scale_ticks(level)
        for center in sorted(hier.net(level)):
            hv = ball_heuristic(inst, hier, level, center, 4, eps, dim_bound)
            if Fraction(hv.value) > cutoff:
                key = (-hv.value, center)
                if best is None or key < best:
                    best = key
        if best is not None:
            return level, best[1]
    return None


def calibrate_sparsity_threshold(
    inst: SfpInstance,
    hier: NetHierarchy,
    eps: float,
    dim_bound: int,
    factor: float,
) -> Fraction | None:
    """Warm-up pass for the demand-density cutoff: median of the positive
    per-ball densities (heuristic weight over ball scale), scaled by
    ``factor``.  Balls that see no demand are ignored -- only places where
    demand exists say anything about how dense "dense" is.  Returns None when
    no ball sees demand at all, in which case nothing can be critical."""
    densities: list[Fraction] = []
    for level in _scan_levels(hier):
        ticks = hier.scale_ticks(level)
        for center in sorted(hier.net(level)):
            hv = ball_heuristic(inst, hier, level, center, 4, eps, dim_bound)
            if hv.value > 0:
                densities.append(Fraction(hv.value, ticks))
    if not densities:
        return None
    med = statistics.median(sorted(densities))
    return Fraction(factor) * med


def choose_split_step(
    inst: SfpInstance,
    hier: NetHierarchy,
    level: int,
    center: int,
    eps: float,
    dim_bound: int,
) -> tuple[int, tuple[int, ...]]:
    """Pick the radius step m for the critical split at ``center``.

    Candidate cut radii are (4 + 2m) * s^level for m = 0..k-1; the chosen m
    is the smallest whose heuristic weight is stable one step out, i.e.
    T(m+1) <= 30k * T(m).  Widening the ball k times multiplies the volume by
    a bounded factor, so some step must be stable; if rounding noise defeats
    all of them we fall back to the step with the smallest growth ratio.
    Returns the step and the sampled heuristic values (for reporting).
    """
    k = max(1, dim_bound)
    values = tuple(
        ball_heuristic(inst, hier, level, center, 4 + 2 * m, eps, dim_bound).value
        for m in range(k + 1)
    )
    for m in range(k):
        if values[m + 1] <= 30 * k * values[m]:
            return m, values
    best = min(
        range(k), key=lambda m: (Fraction(values[m + 1], max(values[m], 1)), m)
    )
    return best, values


@dataclass
class _RunStats:
    nodes: int = 0
    trials: int = 0
    flags: set = field(default_factory=set)


def _unconnected_pairs(
    edges: Iterable[tuple[int, int]], pairs: Sequence[TerminalPair]
) -> list[TerminalPair]:
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    return [p for p in pairs if find(p.a) != find(p.b)]


def _cell_params(cfg: DriverConfig, hier: NetHierarchy) -> CellParams:
    if cfg.mode == "theory":
        return CellParams.from_theory(cfg.eps, cfg.dim_bound, hier.s, hier.num_levels)
    return CellParams.practical(hier.s, num_levels=hier.num_levels)


def _dec_params(cfg: DriverConfig) -> DecompositionParams:
    return DecompositionParams(
        dim_bound=cfg.dim_bound, portal_mode=cfg.mode, eps=cfg.eps
    )


def _best_of_trials(
    inst: SfpInstance,
    hier: NetHierarchy,
    cfg: DriverConfig,
    trial_ss: np.random.SeedSequence,
    stats: _RunStats,
) -> Forest | None:
    """Run the sparse DP under ``n_trials`` independent decompositions and
    keep the lightest extracted forest.  Flags from every trial are merged so
    a miss caused by cap truncation in any trial stays visible."""
    best: tuple[int, tuple, Forest] | None = None
    for child in trial_ss.spawn(cfg.n_trials):
        stats.trials += 1
        rng = np.random.default_rng(child)
        dec = build_decomposition(inst.metric, hier, rng, _dec_params(cfg))
        dp = SparseDp(dec, inst, _cell_params(cfg, hier), cfg.caps)
        value = dp.solve()
        stats.flags |= dp.stats.flags
        if value is None:
            continue
        forest = dp.extract_solution()
        key = (forest.weight(), forest.edges, forest)
        if best is None or key[:2] < best[:2]:
            best = key
    return best[2] if best else None


def _solve_sparse(
    inst: SfpInstance,
    hier: NetHierarchy,
    cfg: DriverConfig,
    node_ss: np.random.SeedSequence,
    stats: _RunStats,
) -> Forest:
    """DP path with the exact-oracle base case and a primal-dual safety net."""
    pairs = inst.demanding_pairs
    if not pairs:
        return Forest.from_edges(inst.metric, [])
    if len(pairs) <= cfg.base_case_pairs and inst.metric.n <= cfg.base_case_points:
        try:
            result = brute_force_forest(inst)
            assert is_feasible(result.forest.edges, inst)
            return result.forest
        except BudgetExceededError:
            stats.flags.add("oracle_budget")
    forest = _best_of_trials(inst, hier, cfg, node_ss, stats)
    if forest is None:
        stats.flags.add("dp_fallback_gw")
        forest = primal_dual_forest(inst)
    assert is_feasible(forest.edges, inst)
    return forest


def _solve_node(
    inst: SfpInstance,
    hier: NetHierarchy,
    cfg: DriverConfig,
    threshold: Fraction | None,
    node_ss: np.random.SeedSequence,
    stats: _RunStats,
    depth: int,
) -> Forest:
    stats.nodes += 1
    pairs = inst.demanding_pairs
    if not pairs:
        return Forest.from_edges(inst.metric, [])
    trial_ss, shift_ss, child_ss = node_ss.spawn(3)
    if depth > inst.metric.n * hier.num_levels + 4:
        # Splits failed to make progress (should be unreachable); stay
        # feasible and say so rather than recurse forever.
        stats.flags.add("depth_limit")
        forest = primal_dual_forest(inst)
        assert is_feasible(forest.edges, inst)
        return forest
    critical = None
    if threshold is not None:
        big_enough = (
            len(pairs) > cfg.base_case_pairs or inst.metric.n > cfg.base_case_points
        )
        if big_enough:
            critical = sparsity_scan(inst, hier, threshold, cfg.eps, cfg.dim_bound)
    if critical is None:
        return _solve_sparse(inst, hier, cfg, trial_ss, stats)

    level, center = critical
    step, _ = choose_split_step(inst, hier, level, center, cfg.eps, cfg.dim_bound)
    shift = float(np.random.default_rng(shift_ss).random() * 0.5)
    split = split_critical(
        inst, hier, level, center, step, shift,
        BallParams.from_eps(cfg.eps, cfg.dim_bound),
    )
    if not split.inner.demanding_pairs and set(split.outer.demanding_pairs) == set(pairs):
        # The cut neither captured nor snapped anything; splitting again
        # would loop, so treat the node as sparse and let the DP have it.
        stats.flags.add("split_stalled")
        return _solve_sparse(inst, hier, cfg, trial_ss, stats)

    inner_forest = _solve_sparse(split.inner, hier, cfg, trial_ss, stats)
    outer_forest = _solve_node(
        split.outer, hier, cfg, threshold, child_ss, stats, depth + 1
    )
    edges = list(inner_forest.edges) + list(outer_forest.edges)

    # Straddling pairs are bridged through a shared net point (inner solves
    # (a, a'), outer solves (a', b)), so the union should already be
    # feasible; the reconnection below is a defensive fallback.
    missing = _unconnected_pairs(edges, pairs)
    if missing:
        m = inst.metric
        net_j = hier.net(split.snap_level)
        for pair in missing:
            for t in (pair.a, pair.b):
                if Fraction(m.dist(center, t)) <= split.cut_radius:
                    rep = m.nearest(t, net_j)
                    if rep != t:
                        edges.append((t, rep))
        still = _unconnected_pairs(edges, missing)
        for pair in still:  # pragma: no cover - safety net, not expected
            stats.flags.add("repair_direct_edge")
            edges.append((pair.a, pair.b))
    union = Forest.from_edges(inst.metric, edges)
    assert is_feasible(union.edges, inst)
    return union


@dataclass
class SolveResult:
    """Outcome of one pipeline run, on the caller's original metric."""

    forest: Forest
    cost: int
    feasible: bool
    gw_cost: int
    oracle_cost: int | None
    ratio_vs_gw: float
    ratio_vs_oracle: float | None
    recursion_nodes: int
    trials: int
    cap_flags: tuple[str, ...]
    seed: int
    config: DriverConfig

    def to_json(self) -> dict:
        return {
            "cost": self.cost,
            "feasible": self.feasible,
            "ratio_vs_oracle": self.ratio_vs_oracle,
            "ratio_vs_gw": self.ratio_vs_gw,
            "recursion_nodes": self.recursion_nodes,
            "trials": self.trials,
            "seed": self.seed,
            "config": self.config.to_json(),
            "cap_flags": list(self.cap_flags),
            "gw_cost": self.gw_cost,
            "oracle_cost": self.oracle_cost,
        }


def _ratio(cost: int, base: int) -> float:
    if base <= 0:
        return 1.0
    return float(Fraction(cost, base))


def _oracle_cost(inst: SfpInstance, want: bool | str) -> int | None:
    if want is False:
        return None
    terms = {t for p in inst.demanding_pairs for t in (p.a, p.b)}
    budget = OracleBudget()
    fits = (
        len(terms) <= budget.max_terminals
        and inst.metric.n - len(terms) <= budget.max_steiner_pool
    )
    if want == "auto" and not fits:
        return None
    try:
        return brute_force_forest(inst, budget=budget).cost
    except BudgetExceededError:
        return None


def solve_instance(
    inst: SfpInstance,
    cfg: DriverConfig | None = None,
    with_oracle: bool | str = "auto",
) -> SolveResult:
    """Run the full pipeline and report the forest with its quality ratios.

    ``with_oracle`` controls the exact-optimum comparison: "auto" computes it
    only when the instance fits the oracle budget, True forces the attempt,
    False skips it.  The returned forest always lives on ``inst``'s own
    metric and is asserted feasible before anything is reported.
    """
    cfg = cfg or DriverConfig()
    stats = _RunStats()
    pairs = inst.demanding_pairs

    if not pairs:
        forest = Forest.from_edges(inst.metric, [])
        return _finish(inst, cfg, forest, stats, with_oracle)

    try:
        scaled = rescale_instance(
            inst.metric, [p.as_tuple() for p in pairs], cfg.eps
        )
    except DegenerateInstanceError:
        # Every demanding pair sits at distance zero; the zero-weight direct
        # edges are an optimal feasible forest.
        forest = Forest.from_edges(inst.metric, [p.as_tuple() for p in pairs])
        return _finish(inst, cfg, forest, stats, with_oracle)

    reduced = SfpInstance.make(scaled.metric, scaled.pairs, inst.dim_bound)
    hier = build_hierarchy(scaled.metric, s=cfg.scale)

    if cfg.sparsity_q0 is not None:
        threshold: Fraction | None = Fraction(cfg.sparsity_q0)
    else:
        threshold = calibrate_sparsity_threshold(
            reduced, hier, cfg.eps, cfg.dim_bound, cfg.q0_factor
        )

    root_ss = np.random.SeedSequence(cfg.seed)
    reduced_forest = _solve_node(reduced, hier, cfg, threshold, root_ss, stats, 0)

    edges = [
        (scaled.new_to_old[a], scaled.new_to_old[b]) for a, b in reduced_forest.edges
    ]
    # Reattach each original terminal to the survivor it was snapped onto;
    # collapsed pairs become two snap edges meeting at the shared survivor.
    for pair in pairs:
        for t in (pair.a, pair.b):
            survivor = scaled.new_to_old[scaled.old_to_new[t]]
            if survivor != t:
                edges.append((t, survivor))
    forest = Forest.from_edges(inst.metric, edges)
    return _finish(inst, cfg, forest, stats, with_oracle)


def _finish(
    inst: SfpInstance,
    cfg: DriverConfig,
    forest: Forest,
    stats: _RunStats,
    with_oracle: bool | str,
) -> SolveResult:
    feasible = is_feasible(forest.edges, inst)
    assert feasible, "pipeline must never report an infeasible forest"
    cost = forest.weight()
    gw_cost = primal_dual_forest(inst).weight()
    oracle = _oracle_cost(inst, with_oracle)
    return SolveResult(
        forest=forest,
        cost=cost,
        feasible=feasible,
        gw_cost=gw_cost,
        oracle_cost=oracle,
        ratio_vs_gw=_ratio(cost, gw_cost),
        ratio_vs_oracle=None if oracle is None else _ratio(cost, oracle),
        recursion_nodes=stats.nodes,
        trials=stats.trials,
        cap_flags=tuple(sorted(stats.flags)),
        seed=cfg.seed,
        config=cfg,
    )
