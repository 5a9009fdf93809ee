"""Experiment configuration, synthetic data, error metrics and benchmarks.

An :class:`ExperimentConfig` fully describes one numerical experiment:
mesh, material, sensors, one flux profile per region, time integration,
noise and the selection parameters.  Configurations are stored as YAML;
:func:`dump_config` is canonical, so ``dump -> load -> dump`` reproduces the
same bytes.

:func:`run_benchmark` compares the selection methods: for each one it
selects the parameters, runs the inverse solver on synthetic measurements
and scores the result.  Only the selection phase is timed.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import MISSING, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .direct import FluxSchedule, IntegratorConfig, simulate
from .errors import (ConfigError, DivergenceError, IHCPError,
                     InvalidArgumentError, SingularityError)
from .fem import (MATERIALS, EdgeRegion, MaterialProperties, Mesh,
                  SensorSelector, ThermalSystem, assemble,
                  build_mesh_1d, build_mesh_2d, build_sensor_selector)
from .hybrid import HybridResult, hybrid_select
from .inverse import InverseModel, InverseResult
from .ridge import (NoiseModel, RidgeEstimator, build_xi_curve,
                    morozov_select, select_alpha_fast)

log = logging.getLogger(__name__)

__all__ = [
    "FluxProfile",
    "MeshSpec",
    "GridSpec",
    "SelectionConfig",
    "ExperimentConfig",
    "MeasurementSeries",
    "ErrorMetrics",
    "BenchmarkRow",
    "Experiment",
    "PRESETS",
    "preset",
    "load_config",
    "dump_config",
    "config_from_dict",
    "build_experiment",
    "synthesize_measurements",
    "error_metrics",
    "reference_alpha",
    "select_fast_alpha",
    "select_hybrid",
    "run_benchmark",
    "run_ensemble",
    "summarize_rows",
    "rows_to_csv",
    "rows_to_json",
    "write_text",
]

METHODS = ("reference", "morozov", "hybrid")


# --------------------------------------------------------------------------
# flux profiles
# --------------------------------------------------------------------------

_PROFILE_KINDS = ("triangular", "sinusoidal", "square_root",
                  "arbitrary_piecewise")


@dataclass(frozen=True)
class FluxProfile:
    """Prescribed heat flux history of one region (W/cm^2).

    ``triangular``
        Zero before ``start``, linear rise to ``peak`` at ``peak_time``,
        linear fall to zero at ``end``.
    ``sinusoidal``
        ``peak/2 * (1 - cos(2 pi (t - start) / period))`` on
        ``[start, end]``; the largest slope is ``pi * peak / period``.
    ``square_root``
        ``peak * sqrt((t - start) / (end - start))`` on ``[start, end]``.
    ``arbitrary_piecewise``
        Linear interpolation through ``(times, values)``, held constant
        outside the breakpoints.

    Every kind is zero outside its support except ``arbitrary_piecewise``.
    """

    kind: str
    peak: float = 0.0
    start: float = 0.0
    end: float | None = None
    peak_time: float | None = None
    period: float | None = None
    times: tuple | None = None
    values: tuple | None = None

    def __post_init__(self):
        if self.kind not in _PROFILE_KINDS:
            raise InvalidArgumentError(
                f"unknown profile kind {self.kind!r}; "
                f"expected one of {_PROFILE_KINDS}")
        if self.kind == "arbitrary_piecewise":
            if self.times is None or self.values is None:
                raise InvalidArgumentError(
                    "arbitrary_piecewise needs times and values")
            t = tuple(float(x) for x in self.times)
            v = tuple(float(x) for x in self.values)
            if len(t) != len(v) or len(t) < 1:
                raise InvalidArgumentError(
                    "times and values must have the same non-zero length")
            if any(b < a for a, b in zip(t, t[1:])):
                raise InvalidArgumentError("breakpoint times must be sorted")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "values", v)
            return
        if self.end is None or not self.end > self.start:
            raise InvalidArgumentError(f"{self.kind} profile needs end > start")
        if self.kind == "triangular":
            pt = self.peak_time
            if pt is None:
                object.__setattr__(self, "peak_time",
                                   0.5 * (self.start + self.end))
            elif not self.start <= pt <= self.end:
                raise InvalidArgumentError("peak_time must lie in [start, end]")
        if self.kind == "sinusoidal" and not (self.period or 0) > 0:
            raise InvalidArgumentError("sinusoidal profile needs period > 0")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "arbitrary_piecewise":
            return np.interp(t, self.times, self.values)
        inside = (t >= self.start) & (t <= self.end)
        s = np.clip(t - self.start, 0.0, None)
        if self.kind == "triangular":
            q = np.interp(t, [self.start, self.peak_time, self.end],
                          [0.0, self.peak, 0.0])
        elif self.kind == "sinusoidal":
            q = 0.5 * self.peak * (1.0 - np.cos(2.0 * np.pi * s / self.period))
        else:
            q = self.peak * np.sqrt(s / (self.end - self.start))
        return np.where(inside, q, 0.0)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for f in fields(self)[1:]:
            v = getattr(self, f.name)
            if v is not None:
                out[f.name] = list(v) if isinstance(v, tuple) else float(v)
        if self.kind == "arbitrary_piecewise":
            out = {k: out[k] for k in ("kind", "times", "values")}
        return out


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MeshSpec:
    """Mesh recipe.  Bar fields apply for ``dimension=1``, plate fields for
    ``dimension=2``; ``flux_regions`` lists plate edge segments."""

    dimension: int = 1
    length: float = 2.5
    perimeter: float = 0.8
    area: float = 0.04
    num_elements: int = 20
    width: float = 5.0
    height: float = 5.0
    thickness: float = 0.01
    nx: int = 20
    ny: int = 20
    flux_regions: tuple = ()

    def build(self) -> Mesh:
        if self.dimension == 1:
            return build_mesh_1d(self.length, self.perimeter, self.area,
                                 self.num_elements)
        if self.dimension == 2:
            return build_mesh_2d(self.width, self.height, self.thickness,
                                 self.nx, self.ny,
                                 [EdgeRegion(**r) for r in self.flux_regions])
        raise InvalidArgumentError("mesh dimension must be 1 or 2")

    @property
    def num_flux_regions(self) -> int:
        return 1 if self.dimension == 1 else len(self.flux_regions)

    def to_dict(self) -> dict:
        if self.dimension == 1:
            keys = ("dimension", "length", "perimeter", "area",
                    "num_elements")
        else:
            keys = ("dimension", "width", "height", "thickness", "nx", "ny")
        out = {k: getattr(self, k) for k in keys}
        if self.dimension == 2:
            out["flux_regions"] = [dict(r) for r in self.flux_regions]
        return out


@dataclass(frozen=True)
class GridSpec:
    """Alpha grid: ``num`` log-spaced values in ``[start, stop]``, with a
    leading zero when ``include_zero``."""

    start: float = 1e-6
    stop: float = 10.0
    num: int = 50
    include_zero: bool = False

    def values(self) -> np.ndarray:
        g = np.logspace(math.log10(self.start), math.log10(self.stop),
                        self.num)
        return np.concatenate([[0.0], g]) if self.include_zero else g


@dataclass(frozen=True)
class SelectionConfig:
    """Inputs of the parameter selectors.

    ``dq_max`` of ``None`` takes the largest per-step change of each
    configured profile.  ``xi_seed`` of ``None`` derives the calibration
    noise seed from the measurement seed.
    """

    delta_alpha: float = 1e-4
    alpha_mode: str = "linear"
    delta_beta: float = 0.02
    xi_time: float = 2.0
    n_iter: int = 2
    rebuild_xi: bool = True
    dq_max: tuple | None = None
    xi_seed: int | None = None
    morozov_grid: GridSpec = field(default_factory=GridSpec)
    reference_grid: GridSpec = field(
        default_factory=lambda: GridSpec(1e-7, 100.0, 91, True))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    mesh: MeshSpec
    material: str | MaterialProperties
    sensors: tuple
    profiles: tuple
    duration: float
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel((0.5,)))
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    lumped: bool = False

    def __post_init__(self):
        if len(self.profiles) != self.mesh.num_flux_regions:
            raise InvalidArgumentError(
                f"{len(self.profiles)} profiles for "
                f"{self.mesh.num_flux_regions} flux regions")
        if not self.duration > 0:
            raise InvalidArgumentError("duration must be positive")
        sig = self.noise.sigma
        if len(sig) not in (1, len(self.sensors)):
            raise InvalidArgumentError(
                "noise sigma needs one entry or one per sensor")
        if self.num_steps < 1:
            raise InvalidArgumentError("duration shorter than one step")

    @property
    def dt(self) -> float:
        return self.integrator.dt

    @property
    def num_steps(self) -> int:
        return int(round(self.duration / self.integrator.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.num_steps + 1) * self.integrator.dt

    def material_properties(self) -> MaterialProperties:
        if isinstance(self.material, MaterialProperties):
            return self.material
        return MATERIALS[self.material]

    def truth_flux(self) -> np.ndarray:
        """Profile values at ``t_0 .. t_M``, shape ``(M + 1, N)``."""
        t = self.times
        return np.column_stack([p(t) for p in self.profiles])

    def dq_max(self) -> np.ndarray:
        if self.selection.dq_max is not None:
            return np.array(self.selection.dq_max, dtype=float)
        return np.max(np.abs(np.diff(self.truth_flux(), axis=0)), axis=0)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, noise=replace(self.noise, seed=int(seed)))

    def to_dict(self) -> dict:
        mat = self.material
        if isinstance(mat, MaterialProperties):
            mat = {f.name: getattr(mat, f.name) for f in fields(mat)}
        sel = self.selection
        sel_d = {
            "delta_alpha": sel.delta_alpha,
            "alpha_mode": sel.alpha_mode,
            "delta_beta": sel.delta_beta,
            "xi_time": sel.xi_time,
            "n_iter": sel.n_iter,
            "rebuild_xi": sel.rebuild_xi,
            "dq_max": None if sel.dq_max is None else list(sel.dq_max),
            "xi_seed": sel.xi_seed,
            "morozov_grid": _grid_dict(sel.morozov_grid),
            "reference_grid": _grid_dict(sel.reference_grid),
        }
        return {
            "name": self.name,
            "mesh": self.mesh.to_dict(),
            "material": mat,
            "lumped": self.lumped,
            "sensors": list(self.sensors),
            "duration": self.duration,
            "profiles": [p.to_dict() for p in self.profiles],
            "integrator": {"beta": self.integrator.beta,
                           "dt": self.integrator.dt},
            "noise": {"sigma": list(self.noise.sigma),
                      "seed": self.noise.seed, "kind": self.noise.kind},
            "selection": sel_d,
        }


def _grid_dict(g: GridSpec) -> dict:
    return {"start": g.start, "stop": g.stop, "num": g.num,
            "include_zero": g.include_zero}


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

class _Reader:
    """Typed access to a nested mapping with dotted-path diagnostics."""

    def __init__(self, data, path=""):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'}: expected a mapping")
        self.data = data
        self.path = path
        self.used: set = set()

    def _where(self, key):
        return f"{self.path}.{key}" if self.path else key

    def get(self, key, kind, default=...):
        self.used.add(key)
        if key not in self.data or self.data[key] is None:
            if default is ...:
                raise ConfigError(f"{self._where(key)}: required field missing")
            return default
        v = self.data[key]
        try:
            if kind is float:
                if isinstance(v, bool):
                    raise TypeError
                return float(v)
            if kind is int:
                if isinstance(v, bool) or float(v) != int(v):
                    raise TypeError
                return int(v)
            if kind is bool:
                if not isinstance(v, bool):
                    raise TypeError
                return v
            if kind is str:
                if not isinstance(v, str):
                    raise TypeError
                return v
            if kind == "floats":
                v = [v] if isinstance(v, (int, float)) else list(v)
                return tuple(float(x) for x in v)
            if kind == "ints":
                v = [v] if isinstance(v, int) else list(v)
                if any(isinstance(x, bool) or float(x) != int(x) for x in v):
                    raise TypeError
                return tuple(int(x) for x in v)
        except (TypeError, ValueError):
            raise ConfigError(
                f"{self._where(key)}: expected {getattr(kind, '__name__', kind)},"
                f" got {v!r}") from None
        return v

    def sub(self, key, required=True):
        self.used.add(key)
        if key not in self.data or self.data[key] is None:
            if required:
                raise ConfigError(f"{self._where(key)}: required section missing")
            return None
        return _Reader(self.data[key], self._where(key))

    def finish(self):
        extra = set(self.data) - self.used
        if extra:
            raise ConfigError(
                f"{self.path or 'config'}: unknown field(s) "
                + ", ".join(sorted(map(str, extra))))


def _parse_grid(r: _Reader | None, default: GridSpec) -> GridSpec:
    if r is None:
        return default
    g = GridSpec(r.get("start", float, default.start),
                 r.get("stop", float, default.stop),
                 r.get("num", int, default.num),
                 r.get("include_zero", bool, default.include_zero))
    r.finish()
    if not (0 < g.start <= g.stop and g.num >= 1):
        raise ConfigError(f"{r.path}: need 0 < start <= stop and num >= 1")
    return g


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a parsed mapping and build an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        With the dotted path of the offending field.
    """
    r = _Reader(data)
    m = r.sub("mesh")
    dim = m.get("dimension", int)
    if dim == 1:
        mesh = MeshSpec(1, m.get("length", float), m.get("perimeter", float),
                        m.get("area", float), m.get("num_elements", int))
    elif dim == 2:
        regions = m.get("flux_regions", list)
        if not isinstance(regions, list) or not regions:
            raise ConfigError("mesh.flux_regions: expected a non-empty list")
        parsed = []
        for k, reg in enumerate(regions):
            rr = _Reader(reg, f"mesh.flux_regions[{k}]")
            item = {"side": rr.get("side", str),
                    "start": rr.get("start", float, None),
                    "end": rr.get("end", float, None)}
            rr.finish()
            try:
                EdgeRegion(**item)
            except InvalidArgumentError as exc:
                raise ConfigError(f"mesh.flux_regions[{k}]: {exc}") from None
            parsed.append(item)
        mesh = MeshSpec(2, width=m.get("width", float),
                        height=m.get("height", float),
                        thickness=m.get("thickness", float),
                        nx=m.get("nx", int), ny=m.get("ny", int),
                        flux_regions=tuple(parsed))
    else:
        raise ConfigError(f"mesh.dimension: expected 1 or 2, got {dim}")
    m.finish()

    r.used.add("material")
    mat = data.get("material")
    if isinstance(mat, str):
        if mat not in MATERIALS:
            raise ConfigError(
                f"material: unknown name {mat!r}; known: "
                + ", ".join(sorted(MATERIALS)))
        material = mat
    elif isinstance(mat, dict):
        mr = _Reader(mat, "material")
        kw = {f.name: mr.get(f.name, float,
                             ... if f.default is MISSING else f.default)
              for f in fields(MaterialProperties)}
        mr.finish()
        try:
            material = MaterialProperties(**kw)
        except (InvalidArgumentError, TypeError) as exc:
            raise ConfigError(f"material: {exc}") from None
    else:
        raise ConfigError("material: expected a name or a mapping")

    profiles = []
    r.used.add("profiles")
    plist = data.get("profiles")
    if not isinstance(plist, list) or not plist:
        raise ConfigError("profiles: expected a non-empty list")
    for k, p in enumerate(plist):
        pr = _Reader(p, f"profiles[{k}]")
        kind = pr.get("kind", str)
        kw = {"kind": kind}
        for key in ("peak", "start", "end", "peak_time", "period"):
            v = pr.get(key, float, None)
            if v is not None:
                kw[key] = v
        for key in ("times", "values"):
            v = pr.get(key, "floats", None)
            if v is not None:
                kw[key] = v
        pr.finish()
        try:
            profiles.append(FluxProfile(**kw))
        except InvalidArgumentError as exc:
            raise ConfigError(f"profiles[{k}]: {exc}") from None

    ir = r.sub("integrator", required=False)
    integ = IntegratorConfig()
    if ir is not None:
        try:
            integ = IntegratorConfig(ir.get("beta", float, 1.0),
                                     ir.get("dt", float, 0.1))
        except InvalidArgumentError as exc:
            raise ConfigError(f"integrator: {exc}") from None
        ir.finish()

    nr = r.sub("noise", required=False)
    noise = NoiseModel((0.5,))
    if nr is not None:
        try:
            noise = NoiseModel(nr.get("sigma", "floats", (0.5,)),
                               nr.get("seed", int, 0),
                               nr.get("kind", str, "gaussian"))
        except InvalidArgumentError as exc:
            raise ConfigError(f"noise: {exc}") from None
        nr.finish()

    sr = r.sub("selection", required=False)
    sel = SelectionConfig()
    if sr is not None:
        d = SelectionConfig()
        dq = sr.get("dq_max", "floats", None)
        sel = SelectionConfig(
            delta_alpha=sr.get("delta_alpha", float, d.delta_alpha),
            alpha_mode=sr.get("alpha_mode", str, d.alpha_mode),
            delta_beta=sr.get("delta_beta", float, d.delta_beta),
            xi_time=sr.get("xi_time", float, d.xi_time),
            n_iter=sr.get("n_iter", int, d.n_iter),
            rebuild_xi=sr.get("rebuild_xi", bool, d.rebuild_xi),
            dq_max=dq,
            xi_seed=sr.get("xi_seed", int, None),
            morozov_grid=_parse_grid(sr.sub("morozov_grid", False),
                                     d.morozov_grid),
            reference_grid=_parse_grid(sr.sub("reference_grid", False),
                                       d.reference_grid),
        )
        sr.finish()
        if sel.alpha_mode not in ("linear", "geometric"):
            raise ConfigError("selection.alpha_mode: expected linear or "
                              "geometric")
        if not (sel.delta_alpha > 0 and sel.delta_beta > 0):
            raise ConfigError("selection: delta_alpha and delta_beta must be "
                              "positive")
        if sel.n_iter < 1:
            raise ConfigError("selection.n_iter: must be >= 1")

    try:
        cfg = ExperimentConfig(
            name=r.get("name", str, "experiment"),
            mesh=mesh,
            material=material,
            sensors=r.get("sensors", "ints"),
            profiles=tuple(profiles),
            duration=r.get("duration", float),
            integrator=integ,
            noise=noise,
            selection=sel,
            lumped=r.get("lumped", bool, False),
        )
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None
    r.finish()
    if sel.dq_max is not None and len(sel.dq_max) != len(profiles):
        raise ConfigError("selection.dq_max: need one entry per flux region")
    return cfg


def dump_config(config: ExperimentConfig) -> str:
    """Canonical YAML text of ``config``."""
    return yaml.safe_dump(config.to_dict(), sort_keys=False,
                          default_flow_style=None)


def load_config(source) -> ExperimentConfig:
    """Parse a YAML file path or text.

    Raises
    ------
    ConfigError
        On YAML syntax errors (with line and column) or schema violations.
    """
    if isinstance(source, Path) or (isinstance(source, str)
                                    and "\n" not in source
                                    and Path(source).exists()):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    else:
        text = str(source)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" \
            if mark is not None else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"YAML syntax error{where}: {problem}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    return config_from_dict(data)


# --------------------------------------------------------------------------
# experiment objects and synthetic data
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Experiment:
    """Assembled system and sensors for a configuration."""

    config: ExperimentConfig
    mesh: Mesh
    system: ThermalSystem
    selector: SensorSelector


def build_experiment(config: ExperimentConfig) -> Experiment:
    mesh = config.mesh.build()
    system = assemble(mesh, config.material_properties(),
                      lumped=config.lumped)
    selector = build_sensor_selector(mesh, config.sensors)
    return Experiment(config, mesh, system, selector)


@dataclass(frozen=True, eq=False)
class MeasurementSeries:
    """Noisy sensor readings and the truth that produced them.

    ``values[m - 1]`` is the reading at ``times[m]``; ``times[0] = 0`` is the
    initial state and carries no measurement.
    """

    times: np.ndarray
    values: np.ndarray
    truth_temperature: np.ndarray
    truth_flux: np.ndarray
    noise: NoiseModel

    @property
    def num_steps(self) -> int:
        return self.values.shape[0]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def synthesize_measurements(config: ExperimentConfig,
                            experiment: Experiment | None = None
                            ) -> MeasurementSeries:
    """Backward-Euler truth at the sensors plus seeded noise."""
    exp = experiment or build_experiment(config)
    M = config.num_steps
    q = config.truth_flux()
    T0 = config.material_properties().initial_temp
    truth = simulate(exp.system, IntegratorConfig(1.0, config.dt),
                     FluxSchedule(q), T0, M)
    clean = exp.selector.extract(truth[1:])
    noise = config.noise.sample(M, exp.selector.num_sensors)
    return MeasurementSeries(times=config.times, values=clean + noise,
                             truth_temperature=truth, truth_flux=q,
                             noise=config.noise)


# --------------------------------------------------------------------------
# scoring
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorMetrics:
    """Mean squared-norm errors over steps ``1..M``.

    ``temp`` uses the sensor temperatures; ``flux`` sums over regions and
    ``flux_per_region`` keeps them apart.  The ``*_rms`` values are square
    roots of the corresponding means.
    """

    temp: float
    flux: float
    flux_per_region: tuple

    @property
    def temp_rms(self) -> float:
        return math.sqrt(self.temp)

    @property
    def flux_rms(self) -> float:
        return math.sqrt(self.flux)


def _mean_sq(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgumentError(
            f"length mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    d = a - b
    return d * d


def error_metrics(truth_temp, est_temp, truth_flux, est_flux
                  ) -> ErrorMetrics:
    """Score an estimate against the truth.

    All arrays are ``(M, ...)`` histories aligned step by step; pass the
    rows for steps ``1..M``.
    """
    dT = _mean_sq(truth_temp, est_temp)
    dq = _mean_sq(truth_flux, est_flux)
    per = dq.mean(axis=0)
    return ErrorMetrics(temp=float(dT.sum(axis=1).mean()),
                        flux=float(per.sum()),
                        flux_per_region=tuple(float(x) for x in per))


def _score(series: MeasurementSeries, selector: SensorSelector,
           result: InverseResult) -> ErrorMetrics:
    return error_metrics(selector.extract(series.truth_temperature[1:]),
                         selector.extract(result.temperature[1:]),
                         series.truth_flux[1:], result.flux[1:])


def reference_alpha(series: MeasurementSeries, model: InverseModel,
                    alpha_grid, T0=None) -> tuple:
    """Grid alpha minimising the true flux error (benchmark oracle).

    Returns ``(alpha, errors)``; diverging runs score ``inf``.
    """
    alphas = np.asarray(alpha_grid, dtype=float)
    errs = np.full(len(alphas), np.inf)
    for i, a in enumerate(alphas):
        try:
            run = model.run(series.values, a, T0=T0)
        except (DivergenceError, SingularityError):
            continue
        d = run.flux[1:] - series.truth_flux[1:]
        errs[i] = float(np.mean(np.sum(d * d, axis=1)))
    if not np.isfinite(errs).any():
        raise DivergenceError("inverse run diverged for every grid alpha")
    return float(alphas[int(np.argmin(errs))]), errs


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------

@dataclass
class BenchmarkRow:
    method: str
    alpha: float
    beta: float
    error_of_temp: float
    error_of_heat_flux: float
    error_of_heat_flux_regions: tuple
    cost: float
    seed: int = 0
    status: str = "ok"

    @property
    def error_of_temp_rms(self) -> float:
        return math.sqrt(self.error_of_temp)

    @property
    def error_of_heat_flux_rms(self) -> float:
        return math.sqrt(self.error_of_heat_flux)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "alpha": self.alpha,
            "beta": self.beta,
            "error_of_temp": self.error_of_temp,
            "error_of_temp_rms": self.error_of_temp_rms,
            "error_of_heat_flux": self.error_of_heat_flux,
            "error_of_heat_flux_rms": self.error_of_heat_flux_rms,
            "error_of_heat_flux_regions": list(
                self.error_of_heat_flux_regions),
            "cost": self.cost,
            "status": self.status,
        }


def _xi_noise(config: ExperimentConfig) -> NoiseModel:
    seed = config.selection.xi_seed
    if seed is None:
        seed = int(np.random.SeedSequence([config.noise.seed, 1])
                   .generate_state(1)[0])
    return NoiseModel(config.noise.sigma, seed=seed, kind="gaussian")


def select_hybrid(config: ExperimentConfig, experiment: Experiment
                  ) -> HybridResult:
    sel = config.selection
    return hybrid_select(
        experiment.system, experiment.selector, config.dt, config.dq_max(),
        config.noise.sigma, sel.delta_alpha, sel.delta_beta,
        n_iter=sel.n_iter, noise=_xi_noise(config),
        rebuild_xi=sel.rebuild_xi, alpha_mode=sel.alpha_mode,
        xi_time=sel.xi_time)


def select_fast_alpha(config: ExperimentConfig, experiment: Experiment,
                      beta: float | None = None):
    """Measurement-free alpha at a fixed beta (the integrator's by default)."""
    sel = config.selection
    b = config.integrator.beta if beta is None else beta
    model = InverseModel(experiment.system, experiment.selector, b, config.dt)
    steps = max(2, int(round(sel.xi_time / config.dt)))
    xi = build_xi_curve(model, _xi_noise(config), steps)
    est = RidgeEstimator(model, config.dq_max(), config.noise.sigma, xi)
    return select_alpha_fast(sel.delta_alpha, est, mode=sel.alpha_mode)


def run_benchmark(config: ExperimentConfig, methods=METHODS,
                  series: MeasurementSeries | None = None) -> list:
    """One :class:`BenchmarkRow` per method.

    Reference and Morozov run at ``beta = 1``; the hybrid method selects
    both parameters.  ``cost`` is the wall-clock time of the selection step.
    A method whose final run diverges is reported with ``status`` set and
    infinite errors.
    """
    for m in methods:
        if m not in METHODS:
            raise InvalidArgumentError(f"unknown method {m!r}")
    exp = build_experiment(config)
    series = series or synthesize_measurements(config, exp)
    T0 = config.material_properties().initial_temp
    sel = config.selection
    base = InverseModel(exp.system, exp.selector, 1.0, config.dt)
    rows = []
    for method in methods:
        t0 = time.perf_counter()
        try:
            if method == "reference":
                alpha, _ = reference_alpha(series, base,
                                           sel.reference_grid.values(), T0)
                beta, model = 1.0, base
            elif method == "morozov":
                res = morozov_select(series.values, sel.morozov_grid.values(),
                                     config.noise.sigma, base, T0)
                alpha, beta, model = res.alpha, 1.0, base
            else:
                hr = select_hybrid(config, exp)
                alpha, beta = hr.alpha, hr.beta
                model = None
        except IHCPError as exc:
            raise type(exc)(f"{method}: {exc}") from exc
        cost = time.perf_counter() - t0
        if model is None:
            model = InverseModel(exp.system, exp.selector, beta, config.dt)
        try:
            run = model.run(series.values, alpha, T0=T0)
            met = _score(series, exp.selector, run)
            rows.append(BenchmarkRow(method, alpha, beta, met.temp, met.flux,
                                     met.flux_per_region, cost,
                                     config.noise.seed))
        except DivergenceError as exc:
            n = config.mesh.num_flux_regions
            rows.append(BenchmarkRow(method, alpha, beta, math.inf, math.inf,
                                     (math.inf,) * n, cost, config.noise.seed,
                                     f"diverged at step {exc.step}"))
    return rows


def run_ensemble(config: ExperimentConfig, seeds, methods=METHODS) -> list:
    """Rows of :func:`run_benchmark` for every seed, concatenated."""
    rows = []
    for s in seeds:
        rows.extend(run_benchmark(config.with_seed(s), methods))
    return rows


def summarize_rows(rows) -> list:
    """Per-method medians of every numeric column (``seed`` becomes the
    ensemble size)."""
    out = []
    for method in dict.fromkeys(r.method for r in rows):
        rs = [r for r in rows if r.method == method]
        regions = np.median(np.array([r.error_of_heat_flux_regions
                                      for r in rs]), axis=0)
        out.append(BenchmarkRow(
            method,
            float(np.median([r.alpha for r in rs])),
            float(np.median([r.beta for r in rs])),
            float(np.median([r.error_of_temp for r in rs])),
            float(np.median([r.error_of_heat_flux for r in rs])),
            tuple(float(x) for x in np.atleast_1d(regions)),
            float(np.median([r.cost for r in rs])),
            len(rs),
            "median",
        ))
    return out


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    dicts = [r.to_dict() for r in rows]
    n = max(len(d["error_of_heat_flux_regions"]) for d in dicts)
    header = [k for k in dicts[0] if k != "error_of_heat_flux_regions"]
    header[header.index("cost"):header.index("cost")] = [
        f"error_of_heat_flux_{j + 1}" for j in range(n)]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for d in dicts:
        reg = d.pop("error_of_heat_flux_regions")
        d.update({f"error_of_heat_flux_{j + 1}": reg[j]
                  for j in range(len(reg))})
        w.writerow([_fmt(d.get(k, "")) for k in header])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps([r.to_dict() for r in rows], indent=2)


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def array_to_csv(times, columns: dict) -> str:
    """CSV with a ``time`` column followed by the named columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    w.writerow(["time", *names])
    data = np.column_stack([np.asarray(times)]
                           + [np.asarray(columns[k]) for k in names])
    for row in data:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return p


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

def _bar(name, material, sensors, profile, dt, **sel):
    return ExperimentConfig(
        name=name,
        mesh=MeshSpec(1, 2.5, 0.8, 0.04, 20),
        material=material,
        sensors=tuple(sensors),
        profiles=(profile,),
        duration=27.0,
        integrator=IntegratorConfig(1.0, dt),
        noise=NoiseModel((0.5,), 0),
        selection=SelectionConfig(**sel),
        lumped=True,
    )


def _plate(name, regions, sensors, profiles, **sel):
    nx = 20
    # node index of a grid point (i, j) on the 21 x 21 plate mesh
    idx = [j * (nx + 1) + i for i, j in sensors]
    return ExperimentConfig(
        name=name,
        mesh=MeshSpec(2, width=5.0, height=5.0, thickness=0.01, nx=nx,
                      ny=nx, flux_regions=tuple(regions)),
        material="plate",
        sensors=tuple(idx),
        profiles=tuple(profiles),
        duration=10.0,
        integrator=IntegratorConfig(1.0, 0.05),
        noise=NoiseModel((0.5,), 0),
        selection=SelectionConfig(**sel),
        lumped=True,
    )


def _presets() -> dict:
    tri = FluxProfile("triangular", peak=5.0, start=0.0, end=27.0,
                      peak_time=13.5)
    sine = FluxProfile("sinusoidal", peak=66.67, start=0.0, end=27.0,
                       period=9.0)
    mid = [{"side": s, "start": 1.5, "end": 3.5}
           for s in ("left", "bottom", "right", "top")]
    plate_tri = FluxProfile("triangular", peak=400.0, start=1.0, end=9.0,
                            peak_time=5.0)
    multi = (
        FluxProfile("triangular", peak=400.0, start=1.0, end=9.0,
                    peak_time=5.0),
        FluxProfile("triangular", peak=300.0, start=2.0, end=8.0,
                    peak_time=4.0),
        FluxProfile("sinusoidal", peak=300.0, start=1.0, end=9.0,
                    period=8.0),
        FluxProfile("arbitrary_piecewise", times=(0.0, 2.0, 4.0, 6.0, 8.0),
                    values=(0.0, 300.0, 300.0, 100.0, 100.0)),
    )
    return {
        "steel-triangular": _bar("steel-triangular", "stainless_steel",
                                 [1], tri, 0.1),
        "silicon-sinusoidal": _bar(
            "silicon-sinusoidal", "silicon", [2], sine, 0.01,
            morozov_grid=GridSpec(1e-7, 10.0, 50),
            reference_grid=GridSpec(1e-8, 100.0, 101, True)),
        "silicon-stability": _bar("silicon-stability", "silicon", [0], tri,
                                  0.1),
        "plate-single": _plate("plate-single", mid[:1], [(2, 10)],
                               [plate_tri]),
        "plate-multi": _plate("plate-multi", mid,
                              [(2, 10), (10, 2), (18, 10), (10, 18)], multi),
    }


PRESETS = _presets()


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; known: " + ", ".join(PRESETS)) from None
