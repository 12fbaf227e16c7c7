"""Scenario files: one YAML document, strictly validated before anything runs."""
import hashlib
import json
import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import DegenparError, ParameterError
from .exact import EXACT_KINDS, ExactSolution
from .geometry import KINDS, Field as GridField, ModelGeometry
from .nonlinearity import Nonlinearity
from .solver import BC_KINDS, SolverConfig

REPORTS = ("thm11", "fde", "pme_n1", "pme_n2", "heat_sz", "residual")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometryBlock(_Strict):
    kind: Literal[KINDS]
    n: int = 1
    domain: tuple[float, float] = (0.0, 1.0)
    grid_points: int = Field(101, ge=5)


class Table(_Strict):
    s: list[float]
    F: list[float]


class EquationBlock(_Strict):
    preset: Literal["heat", "power", "custom"] = "heat"
    p: Optional[float] = None
    table: Optional[Table] = None
    alpha: Optional[float] = None
    delta: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _consistent(self):
        if self.preset == "power" and self.p is None:
            raise ValueError("preset 'power' needs p")
        if self.preset == "custom" and self.table is None:
            raise ValueError("preset 'custom' needs a table {s, F}")
        if self.preset != "custom" and self.table is not None:
            raise ValueError("table is only allowed with preset 'custom'")
        return self


class Tabulated(_Strict):
    """Initial profile, linearly interpolated onto the grid."""

    r: list[float] = Field(min_length=2)
    u: list[float] = Field(min_length=2)

    @model_validator(mode="after")
    def _table(self):
        if len(self.r) != len(self.u):
            raise ValueError("tabulated r and u need equal lengths")
        if np.any(np.diff(self.r) <= 0):
            raise ValueError("tabulated r must be strictly increasing")
        if min(self.u) <= 0:
            raise ValueError("tabulated u must be positive")
        return self


class InitialBlock(_Strict):
    kind: Optional[Literal[EXACT_KINDS]] = None
    params: dict[str, float] = Field(default_factory=dict)
    tabulated: Optional[Tabulated] = None
    t_start: float = 0.0

    @field_validator("params")
    @classmethod
    def _known_params(cls, v):
        allowed = set(ExactSolution.__dataclass_fields__) - {"kind"}
        unknown = set(v) - allowed
        if unknown:
            raise ValueError(f"unknown exact-solution parameters {sorted(unknown)}")
        return v

    @model_validator(mode="after")
    def _one_source(self):
        if (self.kind is None) == (self.tabulated is None):
            raise ValueError("initial data needs exactly one of 'kind' or 'tabulated'")
        return self


class SolverBlock(_Strict):
    dt: float = Field(1e-3, gt=0)
    horizon: float = Field(0.1, gt=0)
    newton_tol: float = Field(1e-10, gt=0)
    newton_max_iter: int = Field(50, ge=1)
    bc: Literal[BC_KINDS] = "periodic"
    positivity_floor: float = Field(1e-12, gt=0)
    stride: int = Field(1, ge=1)
    max_halvings: int = Field(10, ge=0)


class WindowBlock(_Strict):
    x0: float
    t0: float
    R: float = Field(gt=0)
    T: float = Field(gt=0)


class LemmaBlock(_Strict):
    a: float = 1.0
    b: float = 1.0
    n: int = Field(3, ge=1, le=8)
    samples: int = Field(100000, ge=1)


class SweepBlock(_Strict):
    family: Literal["fde", "pme"]
    x0: float
    t0: float
    R: list[float] = Field(min_length=1)
    points: int = Field(401, ge=5)
    snapshots: int = Field(21, ge=3)
    expect: Literal["decreasing", "not_decreasing", "none"] = "none"


class ValueRangeBlock(_Strict):
    m: float = Field(gt=0)
    M: float = Field(gt=0)


class AnalysisBlock(_Strict):
    source: Literal["solver", "exact"] = "solver"
    snapshots: int = Field(21, ge=3)
    windows: list[WindowBlock] = Field(default_factory=list)
    reports: list[Literal[REPORTS]] = Field(default_factory=list)
    lemma: LemmaBlock = LemmaBlock()
    sweep: Optional[SweepBlock] = None
    value_range: Optional[ValueRangeBlock] = None
    seed: int = 0


class ScenarioConfig(_Strict):
    name: str = "scenario"
    geometry: GeometryBlock
    equation: EquationBlock = EquationBlock()
    initial: InitialBlock
    solver: SolverBlock = SolverBlock()
    analysis: AnalysisBlock = AnalysisBlock()

    @model_validator(mode="after")
    def _build_check(self):
        # constructing the domain objects runs their own validation up front
        try:
            self.build_geometry()
            self.build_nonlinearity()
            if self.initial.kind is not None:
                self.build_exact()
            self.build_solver()
        except DegenparError as exc:
            raise ValueError(str(exc)) from exc
        return self

    # -- builders ----------------------------------------------------------

    def build_geometry(self, grid_points=None):
        g = self.geometry
        return ModelGeometry(g.kind, g.n, g.domain[0], g.domain[1], grid_points or g.grid_points)

    def build_nonlinearity(self):
        eq = self.equation
        if eq.preset == "heat":
            return Nonlinearity.heat()
        if eq.preset == "power":
            return Nonlinearity.power(eq.p)
        return Nonlinearity.custom(eq.table.s, eq.table.F)

    def build_exact(self):
        if self.initial.kind is None:
            return None
        params = dict(self.initial.params)
        for key in ("n",):
            if key in params:
                params[key] = int(params[key])
        return ExactSolution(self.initial.kind, **params)

    def build_solver(self):
        s = self.solver
        return SolverConfig(
            dt=s.dt,
            newton_tol=s.newton_tol,
            newton_max_iter=s.newton_max_iter,
            bc=s.bc,
            positivity_floor=s.positivity_floor,
            stride=s.stride,
            max_halvings=s.max_halvings,
        )

    def initial_field(self, geometry=None):
        geom = geometry or self.build_geometry()
        t0 = self.initial.t_start
        if self.initial.tabulated is not None:
            tab = self.initial.tabulated
            values = np.interp(geom.r, tab.r, tab.u)
        else:
            values = self.build_exact().sample(geom, t0)
        return GridField(geom, np.asarray(values, dtype=float), t0)

    # -- provenance --------------------------------------------------------

    def resolved(self):
        return self.model_dump(mode="json")

    def digest(self):
        text = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def load_config(path):
    """Parse and validate a YAML scenario file. Errors surface as ParameterError."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw):
    if not isinstance(raw, dict):
        raise ParameterError("config must be a mapping at top level")
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ParameterError(f"invalid config:\n{exc}") from exc


def clean_json(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_json(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj
