"""HTTP facade over the solver package.

The service owns no state: every endpoint rebuilds what it needs from the
request, so the app can be embedded in-process (the CLI does this through an
ASGI transport) or served standalone with uvicorn.
"""

from __future__ import annotations

import logging
import os
from dataclasses import replace

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..baselines import brute_force_forest, primal_dual_forest
from ..driver import solve_instance
from ..errors import BudgetExceededError, SfpError
from ..generators import GeneratorSpec, generate
from ..instance import SfpInstance
from ..io import compare_rows_to_csv, instance_from_json, instance_to_json
from ..validation import run_suites
from .schemas import (
    CompareIn,
    CompareOut,
    GenerateIn,
    GenerateOut,
    HealthOut,
    InstanceDoc,
    SolveIn,
    SolveOut,
    SuiteOut,
    ValidateIn,
    ValidateOut,
)

logger = logging.getLogger("sfp")


def configure_logging() -> None:
    """Honor the SFP_LOG environment variable (DEBUG/INFO/WARNING/...)."""
    level = os.environ.get("SFP_LOG", "").upper()
    if level:
        logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _build_instance(doc: InstanceDoc) -> SfpInstance:
    try:
        return instance_from_json(doc.model_dump())
    except (SfpError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _spec(req: GenerateIn) -> GeneratorSpec:
    return GeneratorSpec(
        kind=req.kind,
        n_pairs=req.n_pairs,
        spread=req.spread,
        seed=req.seed,
        n_extra=req.n_extra,
    )


def create_app() -> FastAPI:
    configure_logging()
    app = FastAPI(title="sfp-ptas", version=__version__)

    @app.get("/health", response_model=HealthOut)
    def health() -> HealthOut:
        return HealthOut(status="ok", version=__version__)

    @app.post("/generate", response_model=GenerateOut)
    def gen(req: GenerateIn) -> GenerateOut:
        spec = _spec(req)
        inst = generate(spec)
        return GenerateOut(
            instance_id=spec.instance_id,
            spec=req,
            instance=InstanceDoc(**instance_to_json(inst)),
        )

    @app.post("/solve", response_model=SolveOut)
    def solve(req: SolveIn) -> SolveOut:
        inst = _build_instance(req.instance)
        if req.solver == "oracle":
            try:
                result = brute_force_forest(inst)
            except BudgetExceededError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            return SolveOut(
                solver="oracle",
                cost=result.cost,
                feasible=True,
                edges=[[a, b] for a, b in result.forest.edges],
            )
        if req.solver == "gw":
            forest = primal_dual_forest(inst)
            return SolveOut(
                solver="gw",
                cost=forest.weight(),
                feasible=True,
                edges=[[a, b] for a, b in forest.edges],
            )
        result = solve_instance(
            inst, req.config.to_config(inst.dim_bound), with_oracle=req.with_oracle
        )
        return SolveOut(
            solver="ptas",
            cost=result.cost,
            feasible=result.feasible,
            edges=[[a, b] for a, b in result.forest.edges],
            record=result.to_json(),
        )

    @app.post("/compare", response_model=CompareOut)
    def compare(req: CompareIn) -> CompareOut:
        rows = []
        for spec_req in req.specs:
            spec = _spec(spec_req)
            inst = generate(spec)
            # Each row gets its instance's seed so reruns of one row match.
            cfg = replace(req.config.to_config(inst.dim_bound), seed=spec.seed)
            ptas = solve_instance(inst, cfg, with_oracle="auto")
            oracle_cost = ptas.oracle_cost
            gw_cost = ptas.gw_cost
            rows.append(
                {
                    "instance_id": spec.instance_id,
                    "n_pairs": spec.n_pairs,
                    "n_points": inst.metric.n,
                    "oracle_cost": oracle_cost,
                    "gw_cost": gw_cost,
                    "ptas_cost": ptas.cost,
                    "gw_ratio": None
                    if not oracle_cost
                    else round(gw_cost / oracle_cost, 6),
                    "ptas_ratio": None
                    if not oracle_cost
                    else round(ptas.cost / oracle_cost, 6),
                    "seed": spec.seed,
                }
            )
        return CompareOut(rows=rows, csv=compare_rows_to_csv(rows))

    @app.post("/validate", response_model=ValidateOut)
    def validate(req: ValidateIn) -> ValidateOut:
        try:
            reports = run_suites(req.suites, seed=req.seed, samples=req.samples)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        outs = [SuiteOut(name=r.name, ok=r.ok, details=r.details) for r in reports]
        return ValidateOut(ok=all(r.ok for r in reports), reports=outs)

    return app
