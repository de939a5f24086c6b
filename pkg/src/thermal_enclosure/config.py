"""Run configuration: a YAML file validated against a strict schema.

Every section has defaults reproducing the disk benchmark, so an empty file
(or no file) is a valid configuration.  Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigurationError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ShapeConfig(_Strict):
    type: Literal["ball", "box", "ellipse"]
    center: Optional[List[float]] = None
    radius: Optional[float] = None
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None
    semi_axes: Optional[List[float]] = None
    rotation: Optional[float | List[List[float]]] = None

    @model_validator(mode="after")
    def _fields(self):
        need = {"ball": ("center", "radius"), "box": ("lo", "hi"), "ellipse": ("center", "semi_axes")}[self.type]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"{self.type} needs {', '.join(missing)}")
        return self


class SceneConfig(_Strict):
    domain: ShapeConfig = ShapeConfig(type="ball", center=[0.0, 0.0], radius=1.0)
    inclusion: ShapeConfig = ShapeConfig(type="ball", center=[0.2, 0.0], radius=0.3)


class ConductivityConfig(_Strict):
    tensor: List[float] = [2.0, 0.0, 0.0, 2.0]
    contrast_class: Literal["A1", "A2", "indefinite"] = Field("A2", alias="class")

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class FluxConfig(_Strict):
    variant: Literal["constant", "time_power", "probe_flux", "sign_flip"] = "constant"
    a: float = 1.0
    k: int = 0
    phi: Literal["one", "ramp"] = "one"
    mu: Optional[float] = None


class GridConfig(_Strict):
    n: int = 128
    n_t: int = 256
    T: float = 1.0

    @field_validator("n", "n_t")
    @classmethod
    def _min(cls, v):
        if v < 8:
            raise ValueError("must be at least 8")
        return v

    @field_validator("T")
    @classmethod
    def _pos(cls, v):
        if not v > 0:
            raise ValueError("must be positive")
        return v


class TauConfig(_Strict):
    min: float = 10.0
    ratio: float = 1.3
    count: int = 12
    max: Optional[float] = None  # optional cap applied after generation

    @model_validator(mode="after")
    def _check(self):
        if not self.min > 0:
            raise ValueError("tau.min must be positive")
        if not self.ratio > 1:
            raise ValueError("tau.ratio must exceed 1")
        if self.count < 4:
            raise ValueError("tau.count must be at least 4")
        return self

    def values(self):
        taus = self.min * self.ratio ** np.arange(self.count)
        if self.max is not None:
            taus = taus[taus <= self.max * (1 + 1e-12)]
        return taus


class ProbeConfig(_Strict):
    variant: Literal["plane", "point_source", "growing"]
    param: List[float]


class TheoremConfig(_Strict):
    tag: Literal["T1.1", "T1.2", "T1.3", "T1.4", "open"] = "T1.1"
    omegas: Optional[List[List[float]]] = None
    directions: int = 8
    points: Optional[List[List[float]]] = None
    centers: Optional[List[List[float]]] = None
    probe: Optional[ProbeConfig] = None


class ValidationConfig(_Strict):
    identity_taus: List[float] = [25.0]
    layer_taus: List[float] = [25.0, 100.0]
    layer_nodes: int = 256
    norm_taus: List[float] = [100.0, 400.0]
    oracle_taus: List[float] = [25.0, 50.0, 100.0, 200.0, 400.0]
    claim_taus: List[float] = [100.0, 400.0, 1600.0]


class SolverConfig(_Strict):
    method: Literal["auto", "direct", "cg"] = "auto"
    rtol: float = 1e-12


class RunConfig(_Strict):
    dim: int = 2
    scene: Optional[SceneConfig] = None
    conductivity: Optional[ConductivityConfig] = None
    flux: FluxConfig = FluxConfig()
    grid: GridConfig = GridConfig()
    tau: TauConfig = TauConfig()
    theorem: TheoremConfig = TheoremConfig()
    validation: ValidationConfig = ValidationConfig()
    solver: SolverConfig = SolverConfig()
    output: str = "out"
    seed: int = 0
    workers: int = 1

    @field_validator("dim")
    @classmethod
    def _dim(cls, v):
        if v not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        return v

    @model_validator(mode="after")
    def _fill_and_check(self):
        d = self.dim
        if self.scene is None:
            pad = [0.0] * (d - 2)
            object.__setattr__(self, "scene", SceneConfig(
                domain=ShapeConfig(type="ball", center=[0.0, 0.0] + pad, radius=1.0),
                inclusion=ShapeConfig(type="ball", center=[0.2, 0.0] + pad, radius=0.3)))
        if self.conductivity is None:
            object.__setattr__(self, "conductivity", ConductivityConfig(
                tensor=list(np.ravel(2.0 * np.eye(d))), contrast_class="A2"))
        for name, shape in (("scene.domain", self.scene.domain), ("scene.inclusion", self.scene.inclusion)):
            for key in ("center", "lo", "hi", "semi_axes"):
                val = getattr(shape, key)
                if val is not None and len(val) != d:
                    raise ValueError(f"{name}.{key} has {len(val)} coordinates but dim = {d}")
        if self.scene.domain.type == "ellipse":
            raise ValueError("scene.domain must be a ball or a box")
        if self.scene.inclusion.type == "box":
            raise ValueError("scene.inclusion must be a ball or an ellipse")
        if len(self.conductivity.tensor) != d * d:
            raise ValueError(f"conductivity.tensor needs {d * d} entries for dim = {d}")
        tag = self.theorem.tag
        probe_flux = self.flux.variant == "probe_flux"
        if tag in ("T1.2", "T1.3", "T1.4") and not probe_flux:
            raise ValueError(f"theorem {tag} needs flux.variant = probe_flux")
        if tag in ("T1.1", "open") and probe_flux:
            raise ValueError(f"theorem {tag} needs a fixed flux, not probe_flux")
        if tag == "open" and self.theorem.probe is None:
            raise ValueError("theorem.probe is required for the open-problem preset")
        pad = [0.0] * (d - 2)
        if self.theorem.points is None or self.theorem.centers is None:
            th = self.theorem.model_copy(update={
                "points": self.theorem.points or [[2.0, 0.0] + pad],
                "centers": self.theorem.centers or [[0.0, 0.0] + pad]})
            object.__setattr__(self, "theorem", th)
        for key in ("points", "centers"):
            for p in getattr(self.theorem, key):
                if len(p) != d:
                    raise ValueError(f"theorem.{key} entries need {d} coordinates")
        if tag == "T1.3":
            for p in self.theorem.points:
                if _in_closure(self.scene.domain, np.asarray(p, float)):
                    raise ValueError(f"theorem.points entry {p} lies in the closed domain; "
                                     "point sources must be outside")
        if self.theorem.omegas is not None:
            for w in self.theorem.omegas:
                if len(w) != d or abs(math.hypot(*w) - 1.0) > 1e-9:
                    raise ValueError("theorem.omegas entries must be unit vectors of the run dimension")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        return self


def _in_closure(shape: ShapeConfig, p):
    if shape.type == "ball":
        return bool(np.linalg.norm(p - np.asarray(shape.center)) <= shape.radius)
    return bool(np.all(p >= np.asarray(shape.lo)) and np.all(p <= np.asarray(shape.hi)))


def load_config(path=None, overrides=None) -> RunConfig:
    """Read and validate a YAML configuration; ``overrides`` is a nested dict merged on top."""
    data = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config root must be a mapping")
    if overrides:
        data = _merge(data, overrides)
    return parse_config(data)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            lines.append(f"{loc}: {err['msg']}")
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(lines)) from None


def _merge(base, extra):
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def canonical(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json", by_alias=True)


def config_hash(cfg: RunConfig) -> str:
    """Short digest of everything that affects results (output location and worker count excluded)."""
    data = canonical(cfg)
    data.pop("output", None)
    data.pop("workers", None)
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
