"""Request/response models for the HTTP service.

These mirror the on-disk JSON formats in ``sfp_ptas.io`` so a document can
move between files and the API unchanged.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

from ..dp import DpCaps
from ..driver import DriverConfig


class HealthOut(BaseModel):
    status: str
    version: str


class GenerateIn(BaseModel):
    kind: Literal["euclidean2d", "euclidean3d", "grid", "clustered"] = "euclidean2d"
    n_pairs: int = Field(default=3, ge=1)
    spread: int = Field(default=40, ge=4)
    seed: int = 0
    n_extra: int = Field(default=4, ge=0)


class InstanceDoc(BaseModel):
    matrix: list[list[int]]
    coord_scale: int = 1
    pairs: list[list[int]]
    dim_bound: int = 2


class GenerateOut(BaseModel):
    instance_id: str
    spec: GenerateIn
    instance: InstanceDoc


class CapsIn(BaseModel):
    """The externally tunable truncation caps; everything else keeps the
    solver defaults."""

    r: int = Field(default=4, ge=1)
    rho: int = Field(default=8, ge=1)
    edges: int = Field(default=6, ge=1)

    def to_caps(self) -> DpCaps:
        return DpCaps(r_cap=self.r, rho_cap=self.rho, edge_cap=self.edges)


class ConfigIn(BaseModel):
    eps: float = Field(default=0.5, gt=0.0, lt=1.0)
    dim_bound: Optional[int] = Field(default=None, ge=1)
    s: int = Field(default=4, ge=2)
    q0: Optional[float] = Field(default=None, gt=0.0)
    trials: int = Field(default=8, ge=1)
    mode: Literal["practical", "theory"] = "practical"
    seed: int = 0
    caps: CapsIn = Field(default_factory=CapsIn)

    def to_config(self, instance_dim: int | None = None) -> DriverConfig:
        """Unset dim_bound falls back to the instance's own bound."""
        return DriverConfig(
            eps=self.eps,
            dim_bound=self.dim_bound or instance_dim or 2,
            scale=self.s,
            sparsity_q0=self.q0,
            n_trials=self.trials,
            caps=self.caps.to_caps(),
            mode=self.mode,
            seed=self.seed,
        )


class SolveIn(BaseModel):
    instance: InstanceDoc
    solver: Literal["oracle", "gw", "ptas"] = "ptas"
    config: ConfigIn = Field(default_factory=ConfigIn)
    with_oracle: Union[bool, Literal["auto"]] = "auto"


class SolveOut(BaseModel):
    solver: str
    cost: int
    feasible: bool
    edges: list[list[int]]
    record: Optional[dict] = None


class CompareIn(BaseModel):
    specs: list[GenerateIn]
    config: ConfigIn = Field(default_factory=ConfigIn)


class CompareOut(BaseModel):
    rows: list[dict]
    csv: str


class ValidateIn(BaseModel):
    suites: Optional[list[str]] = None
    seed: int = 0
    samples: Optional[int] = Field(default=None, ge=1)


class SuiteOut(BaseModel):
    name: str
    ok: bool
    details: dict


class ValidateOut(BaseModel):
    ok: bool
    reports: list[SuiteOut]
