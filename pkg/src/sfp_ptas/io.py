"""On-disk formats: instance/forest/result JSON and the comparison CSV.

All writers are deterministic (sorted keys, fixed separators, trailing
newline) so identical runs produce byte-identical files; timings never enter
these documents.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .forest import Forest
from .instance import SfpInstance
from .metric import MetricSpace, build_metric

COMPARE_COLUMNS = (
    "instance_id",
    "n_pairs",
    "n_points",
    "oracle_cost",
    "gw_cost",
    "ptas_cost",
    "gw_ratio",
    "ptas_ratio",
    "seed",
)


def instance_to_json(inst: SfpInstance) -> dict:
    """Exact, self-contained description: the tick matrix, the pairs, and the
    doubling-dimension bound.  Coordinates are not kept -- the matrix is the
    ground truth everywhere else in the package."""
    return {
        "matrix": inst.metric.matrix().tolist(),
        "coord_scale": inst.metric.coord_scale,
        "pairs": [[p.a, p.b] for p in inst.pairs],
        "dim_bound": inst.dim_bound,
    }


def instance_from_json(doc: dict) -> SfpInstance:
    if "matrix" in doc:
        metric = MetricSpace(
            np.asarray(doc["matrix"], dtype=np.int64),
            coord_scale=int(doc.get("coord_scale", 1)),
        )
    elif "points" in doc:
        metric = build_metric(points=doc["points"], coord_scale=int(doc.get("coord_scale", 1)))
    else:
        raise ValueError("instance document needs 'matrix' or 'points'")
    pairs = [(int(a), int(b)) for a, b in doc.get("pairs", [])]
    return SfpInstance.make(metric, pairs, int(doc.get("dim_bound", 2)))


def forest_to_json(forest: Forest) -> dict:
    """Edges only; weights are recomputed from the metric on load."""
    return {"edges": [[a, b] for a, b in forest.edges], "cost": forest.weight()}


def forest_from_json(doc: dict, metric: MetricSpace) -> Forest:
    forest = Forest.from_edges(metric, [(int(a), int(b)) for a, b in doc["edges"]])
    if "cost" in doc and forest.weight() != int(doc["cost"]):
        raise ValueError(
            f"forest cost mismatch: document says {doc['cost']}, metric says {forest.weight()}"
        )
    return forest


def dump_json(doc: dict | list, path: str | Path | None = None) -> str:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_json(path: str | Path) -> dict | list:
    return json.loads(Path(path).read_text())


def compare_rows_to_csv(rows: Sequence[dict], path: str | Path | None = None) -> str:
    """Render comparison rows with the fixed column set; missing oracle
    entries stay empty rather than becoming the string 'None'."""
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        clean = {c: ("" if row.get(c) is None else row.get(c, "")) for c in COMPARE_COLUMNS}
        writer.writerow(clean)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
