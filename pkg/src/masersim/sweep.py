"""Declarative multi-run experiments and the figure presets."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Sequence

import numpy as np

from . import analysis as an
from .errors import (
    AnalysisError,
    GridTooLarge,
    IntegrationError,
    MismatchedGrids,
    SchemaError,
    UnknownPreset,
)
from .models import (
    InitialState,
    ModelVariant,
    NormalizedParams,
    Params,
    PhysicalParams,
    default_initial_state,
    normalize,
    params_from_dict,
    perturbed_fixed_point_state,
    predicted_outflow,
    predicted_repetition_rate,
    vector_field,
)
from .ode import IntegratorConfig, Trajectory, derivative_of_log, integrate

ANALYSES = ("conservation", "growth_curve", "outflow", "pulse_metrics", "pulse_train")
CLOCKS = ("T", "unified")
DEFAULT_GRID_CAP = 10_000

_PHOTON_COMPONENT = {
    ModelVariant.TRAD_DIM: "N_k",
    ModelVariant.SEP_DIM: "N_c",
    ModelVariant.TRAD_NORM: "N1",
    ModelVariant.SEP_NORM: "N_c",
    ModelVariant.PULS_NORM: "N_c",
}

FIG1_N0 = (30.0, 10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.03)
FIG6_MU0 = (
    math.sqrt(2) * 1e6, 2e6, math.sqrt(10) * 1e6, math.sqrt(20) * 1e6, math.sqrt(50) * 1e6,
    1e7, math.sqrt(2) * 1e7, 2e7, math.sqrt(10) * 1e7,
)
PRESETS = tuple(f"fig{i}" for i in range(1, 9))


@dataclass(frozen=True)
class AnalysisOptions:
    pulse_component: str | None = None
    growth_component: str | None = None
    train_component: str | None = None
    prominence_frac: float = an.DEFAULT_PROMINENCE
    settle_periods: float | None = None
    plateau_window: float = 1.0
    stage_fraction: float = 0.8

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisOptions":
        return _strict(cls, d, "analysis_options")


def _strict(cls, d: dict, where: str):
    if not isinstance(d, dict):
        raise SchemaError(f"{where} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise SchemaError(f"unknown key(s) in {where}: {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class SweepSpec:
    """A grid of runs over one model.

    ``axes`` are (name, values) pairs; a name is either a field of the base
    parameter type or ``"variant"``. With ``clock="unified"`` the integrator's
    ``t_end`` is read on the tau*sqrt(N) clock, so every grid point covers the
    same physical time, and pulse metrics are reported on that clock.
    """

    variant: ModelVariant
    base_params: Params
    axes: tuple[tuple[str, tuple], ...] = ()
    integrator: IntegratorConfig = IntegratorConfig()
    analyses: tuple[str, ...] = ()
    seed_label: str = "custom"
    initial_state: str | tuple[tuple[str, float], ...] = "default"
    clock: str = "T"
    options: AnalysisOptions = AnalysisOptions()
    grid_cap: int = DEFAULT_GRID_CAP

    def __post_init__(self):
        object.__setattr__(self, "variant", ModelVariant.parse(self.variant))
        object.__setattr__(self, "analyses", tuple(sorted(set(self.analyses))))
        object.__setattr__(self, "axes", tuple((str(n), tuple(v)) for n, v in self.axes))
        if isinstance(self.initial_state, dict):
            object.__setattr__(self, "initial_state", tuple(self.initial_state.items()))
        bad = set(self.analyses) - set(ANALYSES)
        if bad:
            raise SchemaError(f"unknown analyses {sorted(bad)}; expected from {ANALYSES}")
        if self.clock not in CLOCKS:
            raise SchemaError(f"clock must be one of {CLOCKS}")
        allowed = {f.name for f in fields(type(self.base_params))} | {"variant"}
        for name, values in self.axes:
            if name not in allowed:
                raise SchemaError(f"axis {name!r} is not a parameter of "
                                  f"{type(self.base_params).__name__}")
            if not values:
                raise SchemaError(f"axis {name!r} has no values")
        if isinstance(self.initial_state, str) and self.initial_state not in (
                "default", "perturbed-fixed-point"):
            raise SchemaError("initial_state must be 'default', 'perturbed-fixed-point' "
                              "or a mapping of component values")

    @property
    def grid_size(self) -> int:
        return math.prod(len(v) for _, v in self.axes)

    def grid(self):
        names = [n for n, _ in self.axes]
        for combo in itertools.product(*(v for _, v in self.axes)):
            yield dict(zip(names, combo))

    def to_dict(self) -> dict:
        init = self.initial_state
        return {
            "variant": self.variant.value,
            "base_params": self.base_params.to_dict(),
            "axes": [[n, list(v)] for n, v in self.axes],
            "integrator": self.integrator.to_dict(),
            "analyses": list(self.analyses),
            "seed_label": self.seed_label,
            "initial_state": init if isinstance(init, str) else dict(init),
            "clock": self.clock,
            "options": asdict(self.options),
            "grid_cap": self.grid_cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        if not isinstance(d, dict):
            raise SchemaError("sweep spec must be an object")
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise SchemaError(f"unknown key(s) in sweep spec: {sorted(unknown)}")
        for key in ("variant", "base_params"):
            if key not in d:
                raise SchemaError(f"sweep spec needs {key!r}")
        axes = d.get("axes", [])
        if not all(isinstance(a, (list, tuple)) and len(a) == 2 for a in axes):
            raise SchemaError("axes must be a list of [name, values] pairs")
        return cls(
            variant=d["variant"],
            base_params=params_from_dict(d["base_params"]),
            axes=tuple((n, tuple(v)) for n, v in axes),
            integrator=_strict(IntegratorConfig, d.get("integrator", {}), "integrator"),
            analyses=tuple(d.get("analyses", ())),
            seed_label=d.get("seed_label", "custom"),
            initial_state=d.get("initial_state", "default"),
            clock=d.get("clock", "T"),
            options=AnalysisOptions.from_dict(d.get("options", {})),
            grid_cap=int(d.get("grid_cap", DEFAULT_GRID_CAP)),
        )

    def hash(self) -> str:
        return canonical_hash(self.to_dict())


def canonical_hash(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunRecord:
    index: int
    axis_values: dict
    variant: str
    params: dict
    initial_state: dict
    integrator: dict
    spec_hash: str
    status: str = "ok"
    error: str | None = None
    analyses: dict = field(default_factory=dict)
    step_stats: dict = field(default_factory=dict)
    wall_time: float = 0.0
    trajectory: Trajectory | None = field(default=None, repr=False)
    growth: Any = field(default=None, repr=False)
    trajectory_path: str | None = None

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "index": self.index,
            "axis_values": self.axis_values,
            "variant": self.variant,
            "params": self.params,
            "initial_state": self.initial_state,
            "integrator": self.integrator,
            "spec_hash": self.spec_hash,
            "status": self.status,
            "error": self.error,
            "analyses": self.analyses,
            "step_stats": self.step_stats,
            "trajectory_path": self.trajectory_path,
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass(frozen=True)
class Scenario:
    """One fully resolved grid point."""

    variant: ModelVariant
    params: Params
    initial_state: InitialState
    integrator: IntegratorConfig
    time_factor: float


def clock_factor(params: Params, clock: str) -> float:
    """Multiplier taking T onto the requested clock."""
    if clock == "T":
        return 1.0
    return math.sqrt(normalize(params).N0)


def resolve(spec: SweepSpec, point: dict) -> Scenario:
    variant = ModelVariant.parse(point.get("variant", spec.variant))
    changes = {k: float(v) for k, v in point.items() if k != "variant"}
    params = replace(spec.base_params, **changes)
    if spec.initial_state == "default":
        init = default_initial_state(variant, params)
    elif spec.initial_state == "perturbed-fixed-point":
        init = perturbed_fixed_point_state(normalize(params))
    else:
        init = InitialState.from_mapping(variant, dict(spec.initial_state))
    factor = clock_factor(params, spec.clock)
    cfg = spec.integrator
    if factor != 1.0:
        cfg = replace(cfg, t_end=cfg.t_end / factor)
    return Scenario(variant, params, init, cfg, factor)


def run_analyses(traj: Trajectory, scenario: Scenario, names: Sequence[str],
                 options: AnalysisOptions = AnalysisOptions()):
    """Evaluate the requested analyses; failures are recorded per analysis."""
    v = scenario.variant
    results: dict[str, dict] = {}
    growth = None
    q = normalize(scenario.params) if v.normalized else None

    def guarded(name, fn):
        try:
            results[name] = fn()
        except (AnalysisError, KeyError, ValueError) as exc:
            results[name] = {"error": getattr(exc, "code", type(exc).__name__),
                             "message": str(exc).strip("'\"")}

    def do_pulse():
        comp = options.pulse_component or _PHOTON_COMPONENT[v]
        m = an.pulse_metrics(traj, comp)
        return {"component": comp, **m.rescaled(scenario.time_factor).to_dict()}

    def do_growth():
        nonlocal growth
        comp = options.growth_component or _PHOTON_COMPONENT[v]
        growth = derivative_of_log(traj, comp)
        m0 = float(traj.states[0, 0] if v.normalized else 1.0)
        thr = options.stage_fraction * m0
        return {
            "component": comp,
            "plateau": an.growth_plateau(growth, options.plateau_window),
            "plateau_window": options.plateau_window,
            "stage_threshold": thr,
            "stage_duration": an.exponential_stage_duration(growth, thr),
        }

    train_box: list = []

    def do_train():
        comp = options.train_component or _PHOTON_COMPONENT[v]
        settle = None
        if options.settle_periods is not None:
            settle = an.settle_time(q, options.settle_periods)
        tr = an.detect_pulse_train(traj, comp, options.prominence_frac, settle)
        train_box.append(tr)
        out = {"component": comp, **tr.to_dict()}
        if v is ModelVariant.PULS_NORM:
            rate = predicted_repetition_rate(q)
            out["predicted_period"] = rate.period
            out["prediction_valid"] = rate.valid
        return out

    def do_outflow():
        if q is None:
            raise AnalysisError("outflow needs a normalized variant")
        train = train_box[0] if train_box else None
        if train is None and v is ModelVariant.PULS_NORM:
            try:
                train = an.detect_pulse_train(traj, "N_c", options.prominence_frac)
            except AnalysisError:
                train = None
        flux = an.time_averaged_outflow(traj, q.theta, an.outflow_window(traj, train))
        out = flux.to_dict()
        out["window"] = list(flux.window)
        if v is ModelVariant.PULS_NORM and q.I0 == 0:
            out["predicted_total_outflow"] = predicted_outflow(q)
        return out

    def do_conservation():
        return {"drift": an.conserved_quantity_drift(traj, v, scenario.params)}

    table = {
        "pulse_metrics": do_pulse,
        "growth_curve": do_growth,
        "pulse_train": do_train,
        "outflow": do_outflow,
        "conservation": do_conservation,
    }
    for name in ("pulse_train", "pulse_metrics", "growth_curve", "outflow", "conservation"):
        if name in names:
            guarded(name, table[name])
    return {k: results[k] for k in sorted(results)}, growth


def run_point(spec: SweepSpec, index: int, point: dict, spec_hash: str) -> RunRecord:
    sc = resolve(spec, point)
    rec = RunRecord(
        index=index,
        axis_values={k: (v.value if isinstance(v, ModelVariant) else v) for k, v in point.items()},
        variant=sc.variant.value,
        params=sc.params.to_dict(),
        initial_state=sc.initial_state.to_dict(),
        integrator=sc.integrator.to_dict(),
        spec_hash=spec_hash,
    )
    start = time.perf_counter()
    try:
        traj = integrate(vector_field(sc.variant, sc.params), sc.initial_state.as_array(),
                         sc.integrator)
    except IntegrationError as exc:
        rec.status, rec.error = exc.code, str(exc)
    else:
        rec.trajectory = traj
        rec.step_stats = traj.step_stats._asdict()
        rec.analyses, rec.growth = run_analyses(traj, sc, spec.analyses, spec.options)
    rec.wall_time = time.perf_counter() - start
    return rec


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[RunRecord]:
    """Run every grid point; records come back in grid order for any ``jobs``."""
    if spec.grid_size > spec.grid_cap:
        raise GridTooLarge(f"grid has {spec.grid_size} points, cap is {spec.grid_cap}")
    points = list(spec.grid())
    for p in points:
        resolve(spec, p)  # parameter errors abort before any integration
    h = spec.hash()
    if jobs <= 1 or len(points) <= 1:
        return [run_point(spec, i, p, h) for i, p in enumerate(points)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda ip: run_point(spec, ip[0], ip[1], h), enumerate(points)))


# -- model comparison -----------------------------------------------------------

@dataclass
class Overlay:
    columns: dict[str, np.ndarray]
    divergence: float


def compare_models(pair: tuple[RunRecord, RunRecord]) -> Overlay:
    """Align two runs on their shared time grid.

    For a traditional/separated pair the columns are T, M1, N1, M, N_inc, N_c.
    ``divergence`` is the largest gap between the two inversion components.
    """
    a, b = pair
    ta, tb = a.trajectory, b.trajectory
    if ta is None or tb is None:
        raise MismatchedGrids("both records need trajectories")
    if ta.times.shape != tb.times.shape or not np.array_equal(ta.times, tb.times):
        raise MismatchedGrids("records were sampled on different time grids")
    order = sorted((a, b), key=lambda r: r.variant != ModelVariant.TRAD_NORM.value)
    cols: dict[str, np.ndarray] = {"T": ta.times.copy()}
    for rec in order:
        for lab in rec.trajectory.labels:
            key = lab if lab not in cols else f"{lab}_b"
            cols[key] = rec.trajectory.component(lab).copy()
    div = float(np.max(np.abs(ta.states[:, 0] - tb.states[:, 0])))
    return Overlay(cols, div)


# -- presets --------------------------------------------------------------------

def _pair_preset(name, N0, theta, analyses):
    return SweepSpec(
        variant=ModelVariant.SEP_NORM,
        base_params=NormalizedParams(N0=N0, theta=theta),
        axes=(("variant", ("trad-norm", "sep-norm")),),
        integrator=IntegratorConfig(t_end=20.0, sample_interval=0.01),
        analyses=analyses,
        seed_label=name,
    )


def _theta_for(delta, N0, N_total=1e12):
    return delta / math.sqrt(N_total / N0)


def figure_preset(name: str) -> SweepSpec:
    """The sweep behind one of the figures fig1 .. fig8."""
    if name == "fig1":
        return SweepSpec(
            variant=ModelVariant.TRAD_NORM,
            base_params=NormalizedParams(N0=1.0, theta=0.0),
            axes=(("N0", FIG1_N0),),
            integrator=IntegratorConfig(t_end=20.0, sample_interval=0.001),
            analyses=("growth_curve",),
            seed_label=name,
        )
    if name == "fig2":
        return _pair_preset(name, 0.05, 0.0, ("conservation",))
    if name == "fig3":
        return _pair_preset(name, 0.01, 0.0, ("conservation",))
    if name == "fig4":
        return _pair_preset(name, 0.05, _theta_for(2e5, 0.05), ("pulse_metrics",))
    if name == "fig5":
        return _pair_preset(name, 0.01, _theta_for(4e5, 0.01), ("pulse_metrics",))
    if name in ("fig6", "fig7"):
        return SweepSpec(
            variant=ModelVariant.SEP_NORM,
            base_params=PhysicalParams(N_total=1e12, mu0=1e6,
                                       delta=0.0 if name == "fig6" else 4e5),
            axes=(("mu0", FIG6_MU0),),
            integrator=IntegratorConfig(t_end=20.0, sample_interval=0.01),
            analyses=("pulse_metrics",),
            seed_label=name,
            clock="unified",
        )
    if name == "fig8":
        return SweepSpec(
            variant=ModelVariant.PULS_NORM,
            base_params=NormalizedParams(N0=0.05, theta=0.4, Gamma_tilde=0.1, I0=0.0),
            integrator=IntegratorConfig(t_end=400.0, sample_interval=0.01),
            analyses=("outflow", "pulse_train"),
            seed_label=name,
            initial_state="perturbed-fixed-point",
        )
    raise UnknownPreset(f"unknown preset {name!r}; expected one of {PRESETS}")
