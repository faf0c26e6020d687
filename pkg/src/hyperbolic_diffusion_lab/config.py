# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
Experiment configuration: strict YAML loading and the resolved
ExperimentConfig handed to the runners.

Every mapping is checked against the known key set; a typo is an error with
the offending key path and its line in the file, never a silent default.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple, Union

import yaml

from .errors import ConfigError, LabError
from .grid import Boundary, Grid1D
from .params import InitialProfile, ModelParams, ProfileKind
from .telegraph import check_stability


class Experiment(str, Enum):
    EVOLVE = "evolve"
    KG_CHECK = "kg-check"
    MC = "mc"
    RESIDUAL_SCAN = "residual-scan"
    LIMITS = "limits"
    MARTINGALE = "martingale"


class OutputFormat(str, Enum):
    CSV = "csv"
    SUMMARY = "summary"


class MartingaleSource(str, Enum):
    HEAT_KERNEL = "heat_kernel"
    CAUCHY_POISSON = "cauchy_poisson"
    KG = "kg"


REQUIRED = object()

# leaf kinds: "number", "int", "str", "number_or_auto", "numbers" (list of numbers), or a tuple of choices
SCHEMA = {
    "experiment": tuple(e.value for e in Experiment),
    "seed": "int",
    "params": {"lambda": "number", "sigma": "number", "mu": "number", "diffusivity": "number"},
    "grid": {"n_points": "int", "x_min": "number", "x_max": "number",
             "boundary": tuple(b.value for b in Boundary)},
    "time": {"tau_final": "number", "dt": "number_or_auto", "stride": "int"},
    "initial": {"kind": tuple(k.value for k in ProfileKind), "center": "number", "width": "number"},
    "output": {"path": "str", "format": tuple(f.value for f in OutputFormat)},
    "mc": {"n_particles": "int", "shards": "int", "workers": "int", "tolerance": "number"},
    "kg": {"lambdas": "numbers", "mus": "numbers", "times": "numbers", "n_states": "int",
           "tolerance": "number"},
    "scan": {"lambdas": "numbers", "tau": "number", "workers": "int"},
    "limits": {"lambdas": "numbers", "tau0": "number", "spot": "number", "strike": "number",
               "omega": "number", "workers": "int"},
    "martingale": {"source": tuple(s.value for s in MartingaleSource), "x0": "number",
                   "center": "number", "tau": "number", "diffusivity": "number"},
}

# keys each experiment cannot run without
REQUIRED_KEYS = {
    Experiment.EVOLVE: ["params.lambda", "grid.n_points", "grid.x_min", "grid.x_max", "time.tau_final"],
    Experiment.KG_CHECK: ["grid.n_points", "grid.x_min", "grid.x_max"],
    Experiment.MC: ["params.lambda", "grid.n_points", "grid.x_min", "grid.x_max", "time.tau_final",
                    "mc.n_particles"],
    Experiment.RESIDUAL_SCAN: ["grid.n_points", "grid.x_min", "grid.x_max", "scan.lambdas"],
    Experiment.LIMITS: ["params.lambda", "params.sigma", "grid.n_points", "grid.x_min", "grid.x_max",
                        "time.tau_final"],
    Experiment.MARTINGALE: ["grid.n_points", "grid.x_min", "grid.x_max", "martingale.source",
                            "martingale.x0"],
}


@dataclass(frozen=True)
class TimeSpec:
    tau_final: float = 0.0
    dt: Union[float, str] = "auto"
    stride: int = 1


@dataclass(frozen=True)
class OutputSpec:
    path: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV


@dataclass(frozen=True)
class McSpec:
    n_particles: int = 100000
    shards: int = 4
    workers: int = 1
    tolerance: float = 0.05


@dataclass(frozen=True)
class KgSpec:
    lambdas: Tuple[float, ...] = (0.5, 1.0, 2.0)
    mus: Tuple[float, ...] = (0.5, 1.0, 2.0)
    times: Tuple[float, ...] = (0.1, 1.0, 10.0)
    n_states: int = 100
    tolerance: float = 1e-12


@dataclass(frozen=True)
class ScanSpec:
    lambdas: Tuple[float, ...] = (2.0, 4.0, 8.0, 16.0)
    tau: float = 1.0
    workers: int = 1


@dataclass(frozen=True)
class LimitsSpec:
    lambdas: Tuple[float, ...] = (1.0, 1e-2, 1e-4)
    tau0: float = 0.5
    spot: float = 100.0
    strike: float = 100.0
    omega: float = 1.0
    workers: int = 1


@dataclass(frozen=True)
class MartingaleSpec:
    source: MartingaleSource = MartingaleSource.HEAT_KERNEL
    x0: float = 0.0
    center: Optional[float] = None
    tau: float = 1.0
    diffusivity: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    params: Optional[ModelParams] = None
    grid: Optional[Grid1D] = None
    time: TimeSpec = field(default_factory=TimeSpec)
    initial: InitialProfile = field(default_factory=InitialProfile)
    seed: int = 0
    output: OutputSpec = field(default_factory=OutputSpec)
    mc: McSpec = field(default_factory=McSpec)
    kg: KgSpec = field(default_factory=KgSpec)
    scan: ScanSpec = field(default_factory=ScanSpec)
    limits: LimitsSpec = field(default_factory=LimitsSpec)
    martingale: MartingaleSpec = field(default_factory=MartingaleSpec)
    source: Optional[str] = None

    def resolved_dt(self):
        """time.dt, with "auto" replaced by the stability limit (safety 0.9 included)."""
        if self.time.dt != "auto":
            return float(self.time.dt)
        return check_stability(self.grid, self.params, 1.0).dt_max

    def with_overrides(self, seed=None, out=None, fmt=None):
        """CLI flags win over the file."""
        config = self
        if seed is not None:
            config = replace(config, seed=int(seed))
        if out is not None or fmt is not None:
            output = replace(config.output,
                             path=out if out is not None else config.output.path,
                             format=OutputFormat(fmt) if fmt is not None else config.output.format)
            config = replace(config, output=output)
        return config

    def as_dict(self):
        """The fully resolved configuration, as written to the run manifest."""
        out = {
            "experiment": self.experiment.value,
            "seed": self.seed,
            "params": self.params.as_dict() if self.params else None,
            "grid": self.grid.as_dict() if self.grid else None,
            "time": {"tau_final": self.time.tau_final, "dt": self.time.dt, "stride": self.time.stride},
            "initial": self.initial.as_dict(),
            "output": {"path": self.output.path, "format": self.output.format.value},
        }
        if self.params is not None and self.grid is not None:
            out["time"]["dt_resolved"] = self.resolved_dt()
        sections = {
            Experiment.MC: ("mc", self.mc),
            Experiment.KG_CHECK: ("kg", self.kg),
            Experiment.RESIDUAL_SCAN: ("scan", self.scan),
            Experiment.LIMITS: ("limits", self.limits),
            Experiment.MARTINGALE: ("martingale", self.martingale),
        }
        if self.experiment in sections:
            name, spec = sections[self.experiment]
            out[name] = {k: _plain(getattr(spec, k)) for k in spec.__dataclass_fields__}
        return out


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return list(value)
    return value


def _line_index(node, prefix="", index=None):
    """Map dotted key paths to 1-based line numbers from a composed YAML tree."""
    index = {} if index is None else index
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}{key_node.value}"
            index[path] = key_node.start_mark.line + 1
            _line_index(value_node, path + ".", index)
    return index


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _check_leaf(kind, value, path, line):
    def fail(expected):
        raise ConfigError(f"invalid value {value!r}: expected {expected}", path, line)

    if isinstance(kind, tuple):
        if value not in kind:
            fail("one of " + ", ".join(kind))
    elif kind == "number":
        if not _is_number(value):
            fail("a finite number")
    elif kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
    elif kind == "str":
        if not isinstance(value, str):
            fail("a string")
    elif kind == "number_or_auto":
        if value != "auto" and not (_is_number(value) and value > 0):
            fail("a positive number or 'auto'")
    elif kind == "numbers":
        if not isinstance(value, list) or not value or not all(_is_number(v) for v in value):
            fail("a non-empty list of numbers")


def _validate(data, schema, lines, prefix=""):
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", prefix.rstrip(".") or None, lines.get(prefix.rstrip(".")))
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown key '{path}'", path, lines.get(path))
        kind = schema[key]
        if isinstance(kind, dict):
            _validate(value, kind, lines, path + ".")
        else:
            _check_leaf(kind, value, path, lines.get(path))


def _get(data, path, default=REQUIRED, quiet=False):
    node = data
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is REQUIRED:
                raise ConfigError(f"missing required key '{path}'", path)
            if not quiet:
                logging.info(f"[Config] key '{path}' not found. Defaulting to {default!r}.")
            return default
        node = node[part]
    return node


def _section(data, name, spec_cls, quiet=False):
    defaults = spec_cls()
    values = {}
    for key in spec_cls.__dataclass_fields__:
        value = _get(data, f"{name}.{key}", getattr(defaults, key), quiet)
        values[key] = tuple(value) if isinstance(value, list) else value
    return spec_cls(**values)


def _wrap(path, lines, build):
    try:
        return build()
    except ConfigError:
        raise
    except (LabError, ValueError) as e:
        raise ConfigError(str(e), path, lines.get(path)) from e


def build_config(data, experiment=None, lines=None, source=None):
    """ExperimentConfig from an already-parsed mapping."""
    lines = lines or {}
    data = data or {}
    _validate(data, SCHEMA, lines)

    declared = data.get("experiment")
    if experiment is None and declared is None:
        raise ConfigError("missing required key 'experiment'", "experiment")
    experiment = Experiment(experiment or declared)
    if declared is not None and Experiment(declared) is not experiment:
        raise ConfigError(f"config is for '{declared}', not '{experiment.value}'",
                          "experiment", lines.get("experiment"))

    for key in REQUIRED_KEYS[experiment]:
        _get(data, key)
    p = data.get("params", {})
    if "lambda" in p and "sigma" not in p and "diffusivity" not in p:
        raise ConfigError("params needs 'sigma' or 'diffusivity'", "params", lines.get("params"))

    params = None
    if "params" in data and "lambda" in data["params"]:
        p = data["params"]

        def make_params():
            if "sigma" in p:
                return ModelParams(p["lambda"], p["sigma"], p.get("mu", 0.0), p.get("diffusivity"))
            return ModelParams.hyperbolic_heat(p["lambda"], p["diffusivity"], p.get("mu", 0.0))
        params = _wrap("params", lines, make_params)

    grid = None
    if "grid" in data:
        g = data["grid"]
        grid = _wrap("grid", lines, lambda: Grid1D(
            g["n_points"], g["x_min"], g["x_max"], g.get("boundary", Boundary.PERIODIC.value)))

    time_spec = TimeSpec(
        tau_final=float(_get(data, "time.tau_final", 0.0)),
        dt=_get(data, "time.dt", "auto"),
        stride=_get(data, "time.stride", 1),
    )
    if time_spec.tau_final < 0:
        raise ConfigError("tau_final must be >= 0", "time.tau_final", lines.get("time.tau_final"))
    if time_spec.stride < 1:
        raise ConfigError("stride must be >= 1", "time.stride", lines.get("time.stride"))

    initial = InitialProfile()
    if "initial" in data:
        i = data["initial"]
        initial = _wrap("initial", lines, lambda: InitialProfile(
            i.get("kind", ProfileKind.GAUSSIAN.value), i.get("center", 0.0), i.get("width")))

    output = OutputSpec(
        path=_get(data, "output.path", None),
        format=OutputFormat(_get(data, "output.format", OutputFormat.CSV.value)),
    )

    config = ExperimentConfig(
        experiment=experiment,
        params=params,
        grid=grid,
        time=time_spec,
        initial=initial,
        seed=_get(data, "seed", 0),
        output=output,
        mc=_section(data, "mc", McSpec, quiet=experiment is not Experiment.MC),
        kg=_section(data, "kg", KgSpec, quiet=experiment is not Experiment.KG_CHECK),
        scan=_section(data, "scan", ScanSpec, quiet=experiment is not Experiment.RESIDUAL_SCAN),
        limits=_section(data, "limits", LimitsSpec, quiet=experiment is not Experiment.LIMITS),
        martingale=replace(
            _section(data, "martingale", MartingaleSpec, quiet=experiment is not Experiment.MARTINGALE),
            source=MartingaleSource(_get(data, "martingale.source", MartingaleSource.HEAT_KERNEL.value,
                                         quiet=True)),
        ),
        source=source,
    )
    for name in ("mc.n_particles", "mc.shards", "mc.workers", "kg.n_states", "scan.workers",
                 "limits.workers"):
        section, key = name.split(".")
        if getattr(getattr(config, section), key) < 1:
            raise ConfigError(f"{name} must be >= 1", name, lines.get(name))
    return config


def load_config(path, experiment=None):
    """Load and strictly validate an experiment file."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
        lines = _line_index(yaml.compose(text))
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    return build_config(data, experiment, lines, source=str(path))
