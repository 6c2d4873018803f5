"""Command-line front end: ``masersim simulate | figure | sweep | analyze``.

Exit codes: 0 success, 2 configuration error, 3 integration or analysis
failure, 4 I/O failure. Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import io as mio
from . import errors
from .errors import AnalysisError, ConfigError, IntegrationError, MaserSimError, SchemaError
from .models import ModelVariant, NormalizedParams, PhysicalParams, params_from_dict
from .ode import IntegratorConfig, StepStats, Trajectory
from .sweep import (
    ANALYSES,
    PRESETS,
    AnalysisOptions,
    RunRecord,
    SweepSpec,
    compare_models,
    figure_preset,
    resolve,
    run_analyses,
    run_point,
    run_sweep,
)

_NORM_FLAGS = {"N0": "N0", "theta": "theta", "I0": "I0", "gamma_tilde": "Gamma_tilde",
               "source_factor": "spontaneous_source_factor", "N_total": "N_total"}
_PHYS_FLAGS = {"N_total": "N_total", "mu0": "mu0", "delta": "delta", "alpha": "alpha",
               "I0": "I0", "Gamma": "Gamma", "Nk0": "Nk0"}
_PHYS_ONLY = ("mu0", "delta", "alpha", "Gamma", "Nk0")
_INTEGRATOR_FLAGS = {"method": "method", "rel_tol": "rel_tol", "abs_tol": "abs_tol",
                     "initial_step": "initial_step", "max_step": "max_step",
                     "max_steps": "max_steps", "t_end": "t_end",
                     "sample_interval": "sample_interval"}
PULS_DEFAULT_N0 = 0.05
PULS_DEFAULT_T_END = 400.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--variant", choices=[v.value for v in ModelVariant])
    g.add_argument("--N0", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--I0", type=float)
    g.add_argument("--gamma-tilde", dest="gamma_tilde", type=float)
    g.add_argument("--source-factor", dest="source_factor", type=float,
                   help="spontaneous source factor of the separated model (0.5 or 1.0)")
    g.add_argument("--N-total", dest="N_total", type=float)
    g.add_argument("--mu0", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--Gamma", type=float)
    g.add_argument("--Nk0", type=float)
    g.add_argument("--clock", choices=["T", "unified"])


def _add_integrator_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("integrator")
    g.add_argument("--method", choices=["rk45", "rk4"])
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--initial-step", dest="initial_step", type=float)
    g.add_argument("--max-step", dest="max_step", type=float)
    g.add_argument("--max-steps", dest="max_steps", type=int)
    g.add_argument("--t-end", dest="t_end", type=float)
    g.add_argument("--sample-interval", dest="sample_interval", type=float)


def _add_analysis_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("analyses")
    for name in ANALYSES:
        g.add_argument(f"--{name.replace('_', '-')}", dest=f"an_{name}", action="store_true")
    g.add_argument("--component", help="component for pulse, train and growth analyses")
    g.add_argument("--prominence", type=float)
    g.add_argument("--settle-periods", dest="settle_periods", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="masersim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {mio.tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="integrate one model and analyse it")
    s.add_argument("--config", help="run config JSON (or a simulate manifest)")
    s.add_argument("--out", help="output directory")
    s.add_argument("--init", choices=list(mio.SIMULATE_INITIAL_MODES))
    s.add_argument("--set", action="append", default=[], metavar="LABEL=VALUE",
                   help="initial value override for one component (repeatable)")
    s.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; one run")
    _add_param_flags(s)
    _add_integrator_flags(s)
    _add_analysis_flags(s)

    f = sub.add_parser("figure", help="run a figure preset and render its plot")
    f.add_argument("name")
    f.add_argument("--out")
    f.add_argument("--jobs", type=int, default=1)

    w = sub.add_parser("sweep", help="run a sweep from a config file or preset")
    src = w.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="sweep spec JSON (or a sweep manifest)")
    src.add_argument("--preset", help="one of fig1 .. fig8")
    w.add_argument("--out")
    w.add_argument("--jobs", type=int, default=1)

    a = sub.add_parser("analyze", help="re-run analyses on a stored trajectory CSV")
    a.add_argument("trajectory")
    a.add_argument("--manifest", help="manifest written next to the trajectory")
    a.add_argument("--out", help="write the analysis JSON here instead of stdout")
    _add_param_flags(a)
    _add_analysis_flags(a)
    return parser


# -- config assembly ------------------------------------------------------------

def _given(args, names) -> dict:
    return {dst: getattr(args, src) for src, dst in names.items()
            if getattr(args, src, None) is not None}


def _params_from_flags(args, variant: ModelVariant, base=None):
    """Overlay parameter flags on ``base`` (or on the variant's defaults)."""
    physical = (isinstance(base, PhysicalParams) or not variant.normalized
                or any(getattr(args, k, None) is not None for k in _PHYS_ONLY))
    if physical:
        if isinstance(base, NormalizedParams):
            raise SchemaError("dimensional flags cannot modify normalized config parameters")
        if any(getattr(args, k, None) is not None
               for k in ("N0", "theta", "gamma_tilde", "source_factor")):
            raise SchemaError("mix of normalized and dimensional parameter flags")
        d = base.to_dict() if base is not None else {"kind": "physical", "N_total": 1e12}
        d.update(_given(args, _PHYS_FLAGS))
        if "mu0" not in d:
            raise SchemaError("dimensional parameters need --mu0")
        return params_from_dict(d)
    d = base.to_dict() if base is not None else {"kind": "normalized"}
    if base is None and variant is ModelVariant.PULS_NORM:
        d["N0"] = PULS_DEFAULT_N0
    d.update(_given(args, _NORM_FLAGS))
    if "N0" not in d:
        raise SchemaError("normalized parameters need --N0")
    return params_from_dict(d)


def _default_analyses(variant: ModelVariant, params) -> tuple[str, ...]:
    if variant is ModelVariant.PULS_NORM:
        return ("outflow", "pulse_train")
    lossless = isinstance(params, NormalizedParams) and params.theta == 0
    if variant is ModelVariant.TRAD_DIM:
        return ("conservation",)
    if variant is ModelVariant.SEP_DIM:
        return ("conservation", "pulse_metrics")
    if variant is ModelVariant.TRAD_NORM:
        return ("conservation",) if lossless else ()
    conserving = lossless and params.spontaneous_source_factor == 0.5
    return ("conservation", "pulse_metrics") if conserving else ("pulse_metrics",)


def _selected_analyses(args) -> tuple[str, ...]:
    return tuple(n for n in ANALYSES if getattr(args, f"an_{n}", False))


def _options_from_flags(args, base: AnalysisOptions) -> AnalysisOptions:
    changes = {}
    if getattr(args, "component", None):
        changes.update(pulse_component=args.component, growth_component=args.component,
                       train_component=args.component)
    if getattr(args, "prominence", None) is not None:
        changes["prominence_frac"] = args.prominence
    if getattr(args, "settle_periods", None) is not None:
        changes["settle_periods"] = args.settle_periods
    return replace(base, **changes)


def _parse_overrides(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise SchemaError(f"--set expects LABEL=VALUE, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise SchemaError(f"--set {key}: {value!r} is not a number") from None
    return out


def simulate_config(args) -> mio.RunConfig:
    """Defaults, then the config file, then flags."""
    base = mio.load_run_config(args.config) if args.config else None
    variant = ModelVariant.parse(args.variant or (base.variant if base else "sep-norm"))
    params = _params_from_flags(args, variant, base.params if base else None)

    integ = base.integrator if base else IntegratorConfig()
    if base is None and variant is ModelVariant.PULS_NORM:
        integ = replace(integ, t_end=PULS_DEFAULT_T_END)
    integ = replace(integ, **_given(args, _INTEGRATOR_FLAGS))

    if base is not None:
        init = base.initial_state
    else:
        init = "perturbed-fixed-point" if variant is ModelVariant.PULS_NORM else "default"
    if args.init:
        init = args.init
    overrides = _parse_overrides(args.set)
    if overrides:
        if isinstance(init, dict):
            init = {**init, **overrides}
        else:
            start = resolve(SweepSpec(variant, params, initial_state=init), {}).initial_state
            init = {**start.to_dict(), **overrides}

    analyses = _selected_analyses(args) or (base.analyses if base else None)
    if analyses is None:
        analyses = _default_analyses(variant, params)
    options = _options_from_flags(args, base.options if base else AnalysisOptions())
    clock = args.clock or (base.clock if base else "T")
    cfg = mio.RunConfig(variant, params, init, integ, tuple(analyses), options, clock,
                        base.output_dir if base else None)
    resolve(cfg.to_spec(), {})  # surface parameter and initial-state errors before any write
    return cfg


# -- commands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = simulate_config(args)
    out = mio.resolve_output_dir(args.out, cfg.output_dir, "simulate")
    spec = cfg.to_spec()
    rec = run_point(spec, 0, {}, spec.hash())
    if rec.trajectory is None:
        kind = getattr(errors, rec.status, IntegrationError)
        raise kind(rec.error or rec.status)
    mio.write_simulation_outputs(out, cfg, rec)
    print(str(out))
    return 0


def _figure_tables(name: str, records: list[RunRecord], out: Path) -> dict:
    """Figure-specific CSV tables; returns a small JSON-able summary."""
    if name == "fig1":
        rows = []
        for r in records:
            g = r.analyses.get("growth_curve", {})
            rows.append([r.axis_values["N0"], g.get("plateau"), g.get("stage_duration")])
        mio.write_table_csv(out / "growth_summary.csv",
                            ("N0", "plateau", "stage_duration"), rows)
        return {}
    if name in ("fig2", "fig3", "fig4", "fig5"):
        if any(r.trajectory is None for r in records):
            return {"divergence": None}
        ov = compare_models((records[0], records[1]))
        cols = list(ov.columns)
        mio.write_table_csv(out / "overlay.csv", cols,
                            zip(*(ov.columns[c].tolist() for c in cols)))
        return {"divergence": ov.divergence}
    if name in ("fig6", "fig7"):
        rows = []
        for r in records:
            m = r.analyses.get("pulse_metrics", {})
            rows.append([r.axis_values["mu0"], m.get("fwhm"), m.get("leading_edge"),
                         m.get("trailing_edge"), m.get("edge_ratio"), m.get("error", "")])
        mio.write_table_csv(out / "metrics.csv",
                            ("mu0", "fwhm", "leading", "trailing", "edge_ratio", "error"), rows)
        return {}
    if name == "fig8":
        r = records[0]
        flow = r.analyses.get("outflow", {})
        train = r.analyses.get("pulse_train", {})
        row = [flow.get("mean_total_outflow"), flow.get("predicted_total_outflow"),
               train.get("mean_period"), train.get("predicted_period"), train.get("count")]
        mio.write_table_csv(out / "outflow.csv",
                            ("measured_total_outflow", "predicted_total_outflow",
                             "mean_period", "predicted_period", "pulse_count"), [row])
        return {}
    return {}


def cmd_figure(args) -> int:
    spec = figure_preset(args.name)
    out = mio.resolve_output_dir(args.out, None, args.name)
    from .plotting import render_figure

    records = run_sweep(spec, jobs=args.jobs)
    mio.write_sweep_outputs(out, spec, records, command="figure", preset=args.name)
    summary = _figure_tables(args.name, records, out)
    if summary:
        mio.write_json(out / "figure.json", summary)
    render_figure(args.name, records, out)
    print(str(out))
    return 0


def cmd_sweep(args) -> int:
    if args.preset:
        spec, cfg_out, label = figure_preset(args.preset), None, args.preset
    else:
        spec, cfg_out = mio.load_sweep_spec(args.config)
        label = spec.seed_label
    out = mio.resolve_output_dir(args.out, cfg_out, label)
    records = run_sweep(spec, jobs=args.jobs)
    mio.write_sweep_outputs(out, spec, records, command="sweep",
                            preset=spec.seed_label if spec.seed_label in PRESETS else None)
    print(str(out))
    return 0


def _analysis_context(args, traj_path: Path):
    """(spec, grid point) describing the stored run."""
    if args.manifest:
        doc = mio.read_json(args.manifest)
        spec = mio.spec_from_manifest(doc)
        recs = doc.get("records") or [{}]
        match = [r for r in recs if r.get("trajectory_path") == traj_path.name]
        point = (match[0] if match else recs[0]).get("axis_values", {})
        return spec, point
    if not args.variant:
        raise SchemaError("analyze needs --manifest or --variant with parameters")
    variant = ModelVariant.parse(args.variant)
    params = _params_from_flags(args, variant)
    return SweepSpec(variant, params, clock=args.clock or "T"), {}


def cmd_analyze(args) -> int:
    path = Path(args.trajectory)
    spec, point = _analysis_context(args, path)
    names = _selected_analyses(args) or spec.analyses
    if not names:
        raise SchemaError("no analyses selected")
    sc = resolve(spec, point)
    traj = mio.read_trajectory_csv(path, sc.integrator)
    if traj.labels != sc.variant.labels:
        raise SchemaError(f"trajectory columns {traj.labels} do not match "
                          f"{sc.variant.value} {sc.variant.labels}")
    traj = Trajectory(traj.times, traj.states, traj.labels, sc.integrator, StepStats(0, 0))
    options = _options_from_flags(args, spec.options)
    results, _ = run_analyses(traj, sc, names, options)
    text = mio.dumps_json(results)
    if args.out:
        mio.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    failed = [(k, v) for k, v in results.items() if "error" in v]
    if failed:
        name, res = failed[0]
        raise AnalysisError(f"{name}: {res['error']}: {res['message']}")
    return 0


_COMMANDS = {"simulate": cmd_simulate, "figure": cmd_figure, "sweep": cmd_sweep,
             "analyze": cmd_analyze}


def _report(code: str, message: str, exit_code: int) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message,
                                 "exit_code": exit_code}, sort_keys=True) + "\n")
    return exit_code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except MaserSimError as exc:
        return _report(exc.code, str(exc), exc.exit_code)
    except KeyError as exc:
        return _report("SchemaError", str(exc).strip("'\""), 2)


if __name__ == "__main__":
    sys.exit(main())
