"""Experiment configuration files for the batch front end.

Configs are JSON documents with a ``schema_version`` field. Unknown keys are
rejected so that an experiment can always be reproduced from its file.
"""
from __future__ import annotations

import json
import os
from enum import Enum
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, \
    field_validator, model_validator

from . import fixtures
from .errors import ConfigError
from .grid import Boundary, Grid1D, UnitSystem

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Kind(str, Enum):
    VERIFY = "Verify"
    EVOLVE = "Evolve"
    DISPERSION = "Dispersion"
    CLASSICAL_SCAN = "ClassicalScan"
    MANY_BODY = "ManyBody"


class GridSpec(_Strict):
    x_min: float = -20.0
    x_max: float = 20.0
    n_points: int = Field(2001, ge=5)
    boundary: Boundary = Boundary.VANISHING

    @model_validator(mode="after")
    def _ordered(self):
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        return self

    def build(self) -> Grid1D:
        return Grid1D(self.x_min, self.x_max, self.n_points, self.boundary)


class UnitSpec(_Strict):
    hbar: PositiveFloat = 1.0
    c: PositiveFloat = 1.0
    m0: PositiveFloat = 1.0
    e_charge: float = 1.0

    def build(self) -> UnitSystem:
        return UnitSystem(self.hbar, self.c, self.m0, self.e_charge)


class SolverSpec(_Strict):
    solver: Literal["schrodinger", "klein_gordon", "dirac"] = "schrodinger"
    dt: PositiveFloat = 1e-3
    n_steps: PositiveInt = 100
    snapshot_every: PositiveInt = 1


class FixtureSpec(_Strict):
    name: str
    kind: str
    params: dict[str, Any] = Field(default_factory=dict)

    @field_validator("kind")
    @classmethod
    def _known(cls, v):
        if v not in fixtures.REGISTRY:
            raise ValueError(f"unknown fixture kind {v!r}; known: {sorted(fixtures.REGISTRY)}")
        return v


class DecaySpec(_Strict):
    omega: float
    tau: PositiveFloat


class DispersionSpec(_Strict):
    modes: list[int] = Field(default_factory=lambda: list(range(1, 9)))
    probe: int = 0


class ClassicalSpec(_Strict):
    sigma_list: list[PositiveFloat] = Field(default_factory=lambda: [1.4, 1.0, 0.8, 0.7])
    hbar_list: Optional[list[PositiveFloat]] = None
    p0: float = 1.0
    x0: float = 0.0


class ManyBodySpec(_Strict):
    orbitals: tuple[str, str]
    sign: Literal[-1, 0, 1] = -1
    masses: tuple[PositiveFloat, PositiveFloat] = (1.0, 1.0)
    probe_points: PositiveInt = 64


class OutputSpec(_Strict):
    report: Optional[str] = None
    directory: Optional[str] = None


class ExperimentConfig(_Strict):
    schema_version: Literal[1]
    kind: Kind
    seed: int = 0
    grid: GridSpec = Field(default_factory=GridSpec)
    units: UnitSpec = Field(default_factory=UnitSpec)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    fixtures: list[FixtureSpec] = Field(default_factory=list)
    checks: Optional[list[str]] = None
    decay_cases: list[DecaySpec] = Field(default_factory=lambda: [
        DecaySpec(omega=1.0, tau=1.0), DecaySpec(omega=5.0, tau=0.2),
        DecaySpec(omega=0.3, tau=7.0)])
    dispersion: DispersionSpec = Field(default_factory=DispersionSpec)
    classical: ClassicalSpec = Field(default_factory=ClassicalSpec)
    manybody: Optional[ManyBodySpec] = None
    outputs: OutputSpec = Field(default_factory=OutputSpec)
    tolerances: dict[str, PositiveFloat] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _consistent(self):
        names = [f.name for f in self.fixtures]
        if len(set(names)) != len(names):
            raise ValueError("fixture names must be unique")
        from .checks import REGISTRY
        unknown = [k for k in (self.checks or []) + list(self.tolerances) if k not in REGISTRY]
        if unknown:
            raise ValueError(f"unknown check ids {unknown}; known: {sorted(REGISTRY)}")
        if self.kind in (Kind.EVOLVE, Kind.MANY_BODY) and not self.fixtures:
            raise ValueError(f"{self.kind.value} needs at least one fixture")
        if self.kind is Kind.MANY_BODY:
            if self.manybody is None:
                raise ValueError("ManyBody needs a 'manybody' section")
            missing = [o for o in self.manybody.orbitals if o not in names]
            if missing:
                raise ValueError(f"manybody orbitals {missing} are not declared fixtures")
        return self

    def fixture(self, name: str) -> FixtureSpec:
        for f in self.fixtures:
            if f.name == name:
                return f
        raise KeyError(name)


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate a config document, raising ConfigError with a location."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            field = ".".join(str(p) for p in err["loc"]) or "<root>"
            lines.append(f"{source}: field '{field}': {err['msg']}")
        raise ConfigError("\n".join(lines)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def ensure_writable(path) -> Path:
    """Create the parent directory if needed and check that it accepts files."""
    path = Path(path)
    parent = path.parent if path.suffix else path
    try:
        parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create {parent}: {exc.strerror}") from None
    if not os.access(parent, os.W_OK):
        raise ConfigError(f"{parent} is not writable")
    return path
