"""On-disk formats: trajectory CSV, analysis JSON, run configs and manifests.

Every file is written atomically (temporary sibling plus rename). Floats are
written with ``repr`` so they parse back to the identical double.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConfigParseError, IoError, SchemaError
from .models import ModelVariant, Params, params_from_dict
from .ode import IntegratorConfig, LogGrowth, Trajectory
from .sweep import AnalysisOptions, RunRecord, SweepSpec

TOOL_NAME = "masersim"
MANIFEST_VERSION = 1
OUT_ENV = "MASERSIM_OUT"
DEFAULT_OUT_ROOT = "masersim-out"


def tool_version() -> str:
    from . import __version__

    return __version__


# -- primitives -------------------------------------------------------------------

def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def format_float(x) -> str:
    """Shortest text that parses back to the same double; blank for missing."""
    if x is None or x is np.ma.masked:
        return ""
    return repr(float(x))


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, ModelVariant):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps_json(obj: Any) -> str:
    """Deterministic JSON: sorted keys, fixed indent, non-finite floats as strings."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps_json(obj))


def read_json(path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_table_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    def cell(v):
        if isinstance(v, (float, np.floating)) or v is None:
            return format_float(v)
        return str(v)

    return atomic_write_text(path, _csv_text(header, ([cell(v) for v in r] for r in rows)))


# -- trajectories -----------------------------------------------------------------

def trajectory_csv_text(traj: Trajectory) -> str:
    rows = ([repr(t)] + [repr(v) for v in row]
            for t, row in zip(traj.times.tolist(), traj.states.tolist()))
    return _csv_text(("T",) + tuple(traj.labels), rows)


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    return atomic_write_text(path, trajectory_csv_text(traj))


def read_trajectory_csv(path, config: IntegratorConfig | None = None) -> Trajectory:
    """Parse a trajectory CSV (header ``T,<labels...>``)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None
    if not rows or len(rows[0]) < 2 or rows[0][0] != "T":
        raise SchemaError(f"{path}: header must be 'T,<labels...>'")
    header = rows[0]
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names")
    body = rows[1:]
    if len(body) < 2:
        raise SchemaError(f"{path}: need at least two samples")
    try:
        data = np.array([[float(c) for c in r] for r in body], dtype=float)
    except ValueError:
        raise SchemaError(f"{path}: non-numeric cell") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise SchemaError(f"{path}: ragged rows")
    if not np.all(np.isfinite(data)):
        raise SchemaError(f"{path}: non-finite value")
    times = data[:, 0].copy()
    if not np.all(np.diff(times) > 0):
        raise SchemaError(f"{path}: times must be strictly increasing")
    return Trajectory(times, data[:, 1:].copy(), tuple(header[1:]), config)


def growth_csv_rows(curve: LogGrowth):
    vals = curve.values
    for t, v, m in zip(curve.times.tolist(), vals.data.tolist(),
                       np.ma.getmaskarray(vals).tolist()):
        yield (t, None if m else v)


def write_growth_csv(path, curve: LogGrowth) -> Path:
    return write_table_csv(path, ("T", "log_growth_rate"), growth_csv_rows(curve))


# -- single-run configuration -----------------------------------------------------

SIMULATE_INITIAL_MODES = ("default", "perturbed-fixed-point")


@dataclass(frozen=True)
class RunConfig:
    """Serialized single simulation.

    ``initial_state`` is ``"default"``, ``"perturbed-fixed-point"`` or a
    mapping of component values.
    """

    variant: ModelVariant
    params: Params
    initial_state: Any = "default"
    integrator: IntegratorConfig = IntegratorConfig()
    analyses: tuple[str, ...] = ()
    options: AnalysisOptions = AnalysisOptions()
    clock: str = "T"
    output_dir: str | None = None

    def to_spec(self) -> SweepSpec:
        return SweepSpec(
            variant=self.variant,
            base_params=self.params,
            integrator=self.integrator,
            analyses=self.analyses,
            seed_label="simulate",
            initial_state=self.initial_state,
            clock=self.clock,
            options=self.options,
        )

    def to_dict(self) -> dict:
        d = self.to_spec().to_dict()
        return {
            "variant": d["variant"],
            "params": d["base_params"],
            "initial_state": d["initial_state"],
            "integrator": d["integrator"],
            "analyses": d["analyses"],
            "options": d["options"],
            "clock": d["clock"],
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise SchemaError("run config must be a JSON object")
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise SchemaError(f"unknown key(s) in run config: {sorted(unknown)}")
        if "variant" not in d or "params" not in d:
            raise SchemaError("run config needs 'variant' and 'params'")
        integ = d.get("integrator", {})
        if not isinstance(integ, dict):
            raise SchemaError("integrator must be an object")
        unknown = set(integ) - {f.name for f in fields(IntegratorConfig)}
        if unknown:
            raise SchemaError(f"unknown key(s) in integrator: {sorted(unknown)}")
        try:
            cfg = cls(
                variant=ModelVariant.parse(d["variant"]),
                params=params_from_dict(d["params"]),
                initial_state=d.get("initial_state", "default"),
                integrator=IntegratorConfig(**integ),
                analyses=tuple(d.get("analyses", ())),
                options=AnalysisOptions.from_dict(d.get("options", {})),
                clock=d.get("clock", "T"),
                output_dir=d.get("output_dir"),
            )
        except TypeError as exc:
            raise SchemaError(str(exc)) from None
        cfg.to_spec()  # full validation
        return cfg


def unwrap_manifest(doc: Any) -> tuple[Any, str | None]:
    """Return (config, kind); manifests yield their embedded config."""
    if isinstance(doc, dict) and doc.get("tool") == TOOL_NAME and "config" in doc:
        return doc["config"], doc.get("config_kind")
    return doc, None


def load_run_config(path) -> RunConfig:
    doc, _ = unwrap_manifest(read_json(path))
    return RunConfig.from_dict(doc)


def load_sweep_spec(path) -> tuple[SweepSpec, str | None]:
    doc, _ = unwrap_manifest(read_json(path))
    if not isinstance(doc, dict):
        raise SchemaError("sweep config must be a JSON object")
    doc = dict(doc)
    out = doc.pop("output_dir", None)
    return SweepSpec.from_dict(doc), out


def resolve_output_dir(flag: str | None, config_value: str | None, leaf: str) -> Path:
    """Explicit flag, then config value, else ``$MASERSIM_OUT/<leaf>``."""
    if flag:
        return Path(flag)
    if config_value:
        return Path(config_value)
    return Path(os.environ.get(OUT_ENV) or DEFAULT_OUT_ROOT) / leaf


# -- manifests and sweep outputs --------------------------------------------------

def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class Manifest:
    command: str
    config_kind: str
    config: dict
    spec_hash: str
    preset: str | None = None
    records: list = field(default_factory=list)
    started: str = field(default_factory=_now)

    def to_dict(self) -> dict:
        return {
            "tool": TOOL_NAME,
            "version": tool_version(),
            "manifest_version": MANIFEST_VERSION,
            "command": self.command,
            "preset": self.preset,
            "config_kind": self.config_kind,
            "config": self.config,
            "spec_hash": self.spec_hash,
            "records": self.records,
            "timestamps": {"started": self.started, "finished": _now()},
        }


def run_file_stem(index: int) -> str:
    return f"run_{index:03d}"


def summary_rows(records: Sequence[RunRecord]):
    """Flatten scalar analysis fields into one table; columns sorted, union over records."""
    axis_names: list[str] = []
    for r in records:
        for k in r.axis_values:
            if k not in axis_names:
                axis_names.append(k)
    flat = []
    keys: set[str] = set()
    for r in records:
        row = {}
        for name, res in r.analyses.items():
            for k, v in res.items():
                if isinstance(v, (list, tuple, dict)):
                    continue
                row[f"{name}.{k}"] = v
        flat.append(row)
        keys.update(row)
    cols = sorted(keys)
    header = ["index", "variant", *axis_names, "status", *cols]
    rows = []
    for r, extra in zip(records, flat):
        axis = [r.axis_values.get(a, "") for a in axis_names]
        rows.append([r.index, r.variant, *axis, r.status, *[extra.get(c, "") for c in cols]])
    return header, rows


def write_sweep_outputs(out_dir, spec: SweepSpec, records: Sequence[RunRecord],
                        command: str, preset: str | None = None,
                        started: str | None = None) -> Path:
    """Per-record trajectory CSV and analysis JSON, summary CSV, records and manifest."""
    out = Path(out_dir)
    for r in records:
        stem = run_file_stem(r.index)
        if r.trajectory is not None:
            write_trajectory_csv(out / f"{stem}.csv", r.trajectory)
            r.trajectory_path = f"{stem}.csv"
        write_json(out / f"{stem}.analysis.json", r.analyses)
        if r.growth is not None:
            write_growth_csv(out / f"{stem}.growth.csv", r.growth)
    header, rows = summary_rows(records)
    write_table_csv(out / "summary.csv", header, rows)
    write_json(out / "records.json", [r.to_dict() for r in records])
    man = Manifest(command=command, config_kind="sweep", config=spec.to_dict(),
                   spec_hash=spec.hash(), preset=preset,
                   records=[_manifest_record(r) for r in records])
    if started:
        man.started = started
    write_json(out / "manifest.json", man.to_dict())
    return out


def _manifest_record(r: RunRecord) -> dict:
    d = r.to_dict(include_timing=True)
    d.pop("analyses")
    return d


def write_simulation_outputs(out_dir, cfg: RunConfig, record: RunRecord,
                             started: str | None = None) -> Path:
    out = Path(out_dir)
    write_trajectory_csv(out / "trajectory.csv", record.trajectory)
    record.trajectory_path = "trajectory.csv"
    write_json(out / "analysis.json", record.analyses)
    if record.growth is not None:
        write_growth_csv(out / "growth.csv", record.growth)
    man = Manifest(command="simulate", config_kind="run", config=cfg.to_dict(),
                   spec_hash=record.spec_hash, records=[_manifest_record(record)])
    if started:
        man.started = started
    write_json(out / "manifest.json", man.to_dict())
    return out


def spec_from_manifest(doc: dict) -> SweepSpec:
    config, kind = unwrap_manifest(doc)
    if kind == "run":
        return RunConfig.from_dict(config).to_spec()
    return SweepSpec.from_dict(config)
