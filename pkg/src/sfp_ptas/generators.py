"""Seeded instance generators for benchmarks and validation suites.

Every generator is a pure function of its spec: the same spec yields the same
instance byte for byte.  Coordinates are integers so the resulting metrics
are exact; Euclidean distances are rounded up to the next integer tick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import SfpInstance
from .metric import build_metric

KINDS = ("euclidean2d", "euclidean3d", "grid", "clustered")


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for one random instance.

    ``n_pairs`` terminal pairs over ``2 * n_pairs + n_extra`` points spread
    across a box of side ``spread``; ``n_extra`` points carry no demand and
    act as the Steiner pool.
    """

    kind: str = "euclidean2d"
    n_pairs: int = 3
    spread: int = 40
    seed: int = 0
    n_extra: int = 4

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be at least 1")
        if self.spread < 4:
            raise ValueError("spread must be at least 4")
        if self.n_extra < 0:
            raise ValueError("n_extra must be nonnegative")

    @property
    def n_points(self) -> int:
        return 2 * self.n_pairs + self.n_extra

    @property
    def instance_id(self) -> str:
        return f"{self.kind}-p{self.n_pairs}-x{self.n_extra}-w{self.spread}-s{self.seed}"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "n_pairs": self.n_pairs,
            "spread": self.spread,
            "seed": self.seed,
            "n_extra": self.n_extra,
        }

    @staticmethod
    def from_json(doc: dict) -> "GeneratorSpec":
        return GeneratorSpec(
            kind=doc.get("kind", "euclidean2d"),
            n_pairs=int(doc.get("n_pairs", 3)),
            spread=int(doc.get("spread", 40)),
            seed=int(doc.get("seed", 0)),
            n_extra=int(doc.get("n_extra", 4)),
        )


def _distinct_points(rng: np.random.Generator, n: int, draw) -> list[tuple[int, ...]]:
    """Draw until ``n`` distinct coordinate tuples have appeared."""
    seen: dict[tuple[int, ...], None] = {}
    guard = 0
    while len(seen) < n:
        guard += 1
        if guard > 200 * n + 1000:
            raise ValueError("generator cannot place that many distinct points")
        seen.setdefault(draw(rng), None)
    return list(seen)[:n]


def _uniform_box(spec: GeneratorSpec, dim: int) -> list[tuple[int, ...]]:
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    hi = spec.spread + 1
    return _distinct_points(
        rng, spec.n_points, lambda r: tuple(int(c) for c in r.integers(0, hi, size=dim))
    )


def _grid_points(spec: GeneratorSpec) -> list[tuple[int, ...]]:
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    side = 1
    while side * side < spec.n_points:
        side += 1
    pitch = max(1, spec.spread // max(1, side - 1))
    cells = [(i * pitch, j * pitch) for i in range(side) for j in range(side)]
    take = rng.choice(len(cells), size=spec.n_points, replace=False)
    return [cells[int(i)] for i in sorted(take)]


def _clustered_points(spec: GeneratorSpec) -> list[tuple[int, ...]]:
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    n_centers = max(2, spec.n_pairs)
    hi = spec.spread + 1
    centers = [tuple(int(c) for c in rng.integers(0, hi, size=2)) for _ in range(n_centers)]
    sigma = max(1.0, spec.spread / 16.0)

    def draw(r: np.random.Generator) -> tuple[int, ...]:
        cx, cy = centers[int(r.integers(0, n_centers))]
        dx, dy = r.normal(0.0, sigma, size=2)
        x = int(np.clip(round(cx + dx), 0, spec.spread))
        y = int(np.clip(round(cy + dy), 0, spec.spread))
        return (x, y)

    return _distinct_points(rng, spec.n_points, draw)


def generate(spec: GeneratorSpec) -> SfpInstance:
    """Materialize the instance a spec describes.

    Terminals are the first ``2 * n_pairs`` points after a seeded shuffle, so
    demand lands on uniformly chosen points; the pairing walks them in
    shuffled order.  ``dim_bound`` records the coordinate dimension for the
    Euclidean kinds (grid and clustered live in the plane).
    """
    if spec.kind == "euclidean2d":
        coords, dim_bound = _uniform_box(spec, 2), 2
    elif spec.kind == "euclidean3d":
        coords, dim_bound = _uniform_box(spec, 3), 3
    elif spec.kind == "grid":
        coords, dim_bound = _grid_points(spec), 2
    else:
        coords, dim_bound = _clustered_points(spec), 2
    metric = build_metric(points=coords, coord_scale=1)
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 1)))
    order = rng.permutation(metric.n)
    terminals = [int(v) for v in order[: 2 * spec.n_pairs]]
    pairs = [
        (terminals[2 * i], terminals[2 * i + 1]) for i in range(spec.n_pairs)
    ]
    return SfpInstance.make(metric, pairs, dim_bound)


def generate_batch(
    base: GeneratorSpec, count: int, seed0: int | None = None
) -> list[tuple[GeneratorSpec, SfpInstance]]:
    """``count`` instances differing only in seed, starting at ``seed0``
    (default: the base spec's own seed)."""
    start = base.seed if seed0 is None else seed0
    out = []
    for offset in range(count):
        spec = GeneratorSpec(
            kind=base.kind,
            n_pairs=base.n_pairs,
            spread=base.spread,
            seed=start + offset,
            n_extra=base.n_extra,
        )
        out.append((spec, generate(spec)))
    return out
