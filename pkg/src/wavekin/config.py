"""Scenario configuration: YAML loading, assumption validation, round-tripping.

A scenario document is a key/value tree with the blocks grid, initial,
source, kernel, time, picard plus the scalars rhs, kappa, tail_tolerance.
Unknown keys are rejected.  Validation messages cite the physical
assumption they enforce (A1-A4: local time integrability, nonnegativity,
frequency integrability, locally integrable total source).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from .errors import ValidationError
from .grid import FrequencyGrid, build_uniform_grid, integrate_full
from .operators import RHS_FORMS, Kernel, SourceTerm, Spectrum


@dataclass(frozen=True)
class GridConfig:
    omega_max: float = 40.0
    n: int = 2001


@dataclass(frozen=True)
class InitialConfig:
    family: str = "exp"
    amplitude: float = 1.0
    rate: float = 1.0
    path: Optional[str] = None


@dataclass(frozen=True)
class SourceConfig:
    family: str = "zero"
    amplitude: float = 0.0
    rate: float = 1.0
    profile: str = "constant"
    level: float = 1.0
    sigma: float = 1.0
    path: Optional[str] = None


@dataclass(frozen=True)
class KernelConfig:
    mode: str = "constant"
    a: float = 0.0
    b: float = 0.0


@dataclass(frozen=True)
class TimeConfig:
    t_end: float = 1.0
    dt: float = 1e-3
    dt_min: float = 1e-9
    blowup_threshold: float = 1e6
    store_every: int = 1
    clamp_negative: bool = True


@dataclass(frozen=True)
class PicardConfig:
    a: float = 0.0
    b: Union[str, float] = "auto"
    tol: float = 1e-8
    max_iter: int = 50
    time_nodes: int = 201


@dataclass(frozen=True)
class ScenarioConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    rhs: str = "eq2"
    time: TimeConfig = field(default_factory=TimeConfig)
    kappa: Union[str, float] = "fit"
    picard: PicardConfig = field(default_factory=PicardConfig)
    tail_tolerance: float = 1e-8


_BLOCKS = {
    "grid": (GridConfig, {"omega_max", "n"}),
    "initial": (InitialConfig, {"family", "amplitude", "rate", "path"}),
    "source": (SourceConfig, {"family", "amplitude", "rate", "profile", "level",
                              "sigma", "path"}),
    "kernel": (KernelConfig, {"mode", "a", "b"}),
    "time": (TimeConfig, {"t_end", "dt", "dt_min", "blowup_threshold",
                          "store_every", "clamp_negative"}),
    "picard": (PicardConfig, {"a", "b", "tol", "max_iter", "time_nodes"}),
}
_TOP_KEYS = set(_BLOCKS) | {"rhs", "kappa", "tail_tolerance"}


def _build_block(name: str, raw) -> object:
    cls, allowed = _BLOCKS[name]
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValidationError(f"config block {name!r} must be a mapping")
    unknown = set(raw) - allowed
    if unknown:
        raise ValidationError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return cls(**raw)


def config_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ValidationError("config document must be a mapping")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {name: _build_block(name, doc.get(name)) for name in _BLOCKS}
    if "rhs" in doc:
        kwargs["rhs"] = doc["rhs"]
    if "kappa" in doc:
        kwargs["kappa"] = doc["kappa"]
    if "tail_tolerance" in doc:
        kwargs["tail_tolerance"] = float(doc["tail_tolerance"])
    cfg = ScenarioConfig(**kwargs)
    validate_config(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed config document: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return asdict(cfg)


def config_hash(cfg: ScenarioConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def validate_config(cfg: ScenarioConfig) -> None:
    g = cfg.grid
    if g.n < 2:
        raise ValidationError(f"grid needs at least 2 nodes, got n={g.n}")
    if not g.omega_max > 0:
        raise ValidationError(f"omega_max must be positive, got {g.omega_max}")

    ini = cfg.initial
    if ini.family not in ("exp", "tabulated"):
        raise ValidationError(f"unknown initial family {ini.family!r}")
    if ini.family == "exp":
        if ini.amplitude < 0:
            raise ValidationError("A2: negative initial amplitude")
        if not ini.rate > 0:
            raise ValidationError("A3: exponential initial needs rate > 0 to be integrable")
    elif ini.path is None:
        raise ValidationError("tabulated initial needs a path")

    s = cfg.source
    if s.family not in ("zero", "separable", "tabulated"):
        raise ValidationError(f"unknown source family {s.family!r}")
    if s.family == "separable":
        if s.amplitude < 0:
            raise ValidationError("A2: negative source amplitude")
        if not s.rate > 0:
            raise ValidationError("A4: separable source needs rate > 0")
        if s.profile not in ("constant", "exp_decay"):
            raise ValidationError(f"unknown source time profile {s.profile!r}")
        if s.profile == "constant" and s.level < 0:
            raise ValidationError("A2: negative source level")
    if s.family == "tabulated" and s.path is None:
        raise ValidationError("tabulated source needs a path")

    if cfg.kernel.mode not in ("constant", "power"):
        raise ValidationError(f"unknown kernel mode {cfg.kernel.mode!r}")
    if cfg.rhs not in RHS_FORMS:
        raise ValidationError(f"rhs must be one of {RHS_FORMS}, got {cfg.rhs!r}")

    t = cfg.time
    if not t.t_end > 0:
        raise ValidationError(f"t_end must be positive, got {t.t_end}")
    if not 0 < t.dt_min <= t.dt:
        raise ValidationError(f"need 0 < dt_min <= dt, got dt={t.dt}, dt_min={t.dt_min}")
    if not t.blowup_threshold > 0:
        raise ValidationError("blowup_threshold must be positive")
    if t.store_every < 1:
        raise ValidationError("store_every must be >= 1")

    if isinstance(cfg.kappa, str):
        if cfg.kappa not in ("paper", "fit"):
            raise ValidationError(f"kappa must be 'paper', 'fit' or a number, got {cfg.kappa!r}")
    elif not cfg.kappa > 0:
        raise ValidationError(f"kappa must be positive, got {cfg.kappa}")

    p = cfg.picard
    if not (p.b == "auto" or (isinstance(p.b, (int, float)) and p.b > p.a)):
        raise ValidationError("picard.b must be 'auto' or a number greater than picard.a")
    if not p.tol > 0:
        raise ValidationError("picard.tol must be positive")
    if p.max_iter < 1 or p.time_nodes < 2:
        raise ValidationError("picard needs max_iter >= 1 and time_nodes >= 2")

    if not cfg.tail_tolerance > 0:
        raise ValidationError("tail_tolerance must be positive")


def build_grid(cfg: ScenarioConfig) -> FrequencyGrid:
    return build_uniform_grid(cfg.grid.omega_max, cfg.grid.n)


def build_initial(cfg: ScenarioConfig, grid: FrequencyGrid,
                  base_dir: Optional[Path] = None) -> Spectrum:
    ini = cfg.initial
    if ini.family == "exp":
        values = ini.amplitude * np.exp(-ini.rate * grid.nodes)
    else:
        path = Path(ini.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        data = np.loadtxt(path, delimiter=",", comments="#")
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValidationError("tabulated initial needs two columns: omega, N")
        if np.min(data[:, 1]) < 0:
            raise ValidationError("A2: tabulated initial has negative samples")
        values = np.interp(grid.nodes, data[:, 0], data[:, 1], left=data[0, 1], right=0.0)
    spec = Spectrum(grid=grid, values=values, time=0.0)
    _check_tail(spec, cfg.tail_tolerance)
    return spec


def _check_tail(spec: Spectrum, tail_tolerance: float) -> None:
    grid = spec.grid
    total = integrate_full(spec.values, grid)
    if total <= 0:
        return
    outer = spec.values * (grid.nodes >= 0.5 * grid.omega_max)
    tail = integrate_full(outer, grid)
    if tail > tail_tolerance * total:
        raise ValidationError(
            "truncation check failed: relative initial mass beyond omega_max/2 "
            f"is {tail / total:.3e} > tail_tolerance={tail_tolerance:.3e}; "
            "increase omega_max"
        )


def build_source(cfg: ScenarioConfig, grid: FrequencyGrid,
                 base_dir: Optional[Path] = None) -> SourceTerm:
    s = cfg.source
    if s.family == "zero":
        return SourceTerm.zero()
    if s.family == "separable":
        return SourceTerm.separable(s.amplitude, s.rate, profile=s.profile,
                                    level=s.level, sigma=s.sigma)
    path = Path(s.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    data = np.loadtxt(path, delimiter=",", comments="#")
    data = np.atleast_2d(data)
    if data.shape[1] != grid.n + 1:
        raise ValidationError(
            f"tabulated source needs 1 + n = {grid.n + 1} columns, got {data.shape[1]}"
        )
    return SourceTerm.tabulated(data[:, 0], data[:, 1:])


def build_kernels(cfg: ScenarioConfig) -> tuple[Kernel, Kernel, Kernel]:
    k = cfg.kernel
    if k.mode == "constant":
        kern = Kernel(mode="constant_one")
    else:
        kern = Kernel(mode="power_law", a=k.a, b=k.b)
    return (kern, kern, kern)
