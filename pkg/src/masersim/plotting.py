"""Static SVG figures for the preset sweeps."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import atomic_write_text  # noqa: E402
from .models import normalize, params_from_dict, predicted_outflow  # noqa: E402
from .sweep import RunRecord  # noqa: E402

# fixed ids and no date stamp keep SVG output byte-stable
_RC = {"svg.hashsalt": "masersim", "svg.fonttype": "path", "figure.dpi": 100}
TRAD_COLOR = "tab:red"
SEP_COLOR = "tab:blue"


def _save(fig, path: Path) -> Path:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_text(path, buf.getvalue())


def _ok(records: Sequence[RunRecord]):
    return [r for r in records if r.trajectory is not None]


def plot_growth_curves(records: Sequence[RunRecord], path: Path) -> Path:
    """Growth rate d(ln N)/dT per run on a logarithmic vertical axis."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for r in records:
            if r.growth is None:
                continue
            rate = r.growth.rate
            ax.plot(r.growth.times, rate.filled(np.nan), lw=1.0,
                    label=f"N0 = {r.axis_values.get('N0', '')}")
        ax.set_yscale("log")
        ax.set_xlabel("T")
        ax.set_ylabel("d ln N1 / dT")
        ax.legend(fontsize=7, ncol=3)
        fig.tight_layout()
        return _save(fig, path)


def plot_model_pair(records: Sequence[RunRecord], path: Path, title: str = "") -> Path:
    """Inversion and photon numbers, traditional in red, separated in blue."""
    with plt.rc_context(_RC):
        fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
        for r in _ok(records):
            tr = r.trajectory
            if r.variant == "trad-norm":
                top.plot(tr.times, tr.component("M1"), color=TRAD_COLOR, label="M1")
                bottom.plot(tr.times, tr.component("N1"), color=TRAD_COLOR, label="N1")
            else:
                top.plot(tr.times, tr.component("M"), color=SEP_COLOR, label="M")
                bottom.plot(tr.times, tr.component("N_c"), color=SEP_COLOR, label="N_c")
                bottom.plot(tr.times, tr.component("N_inc"), color=SEP_COLOR, ls="--",
                            label="N_inc")
        top.set_ylabel("inversion")
        bottom.set_ylabel("photons")
        bottom.set_xlabel("T")
        top.legend(fontsize=8)
        bottom.legend(fontsize=8)
        if title:
            top.set_title(title, fontsize=9)
        fig.tight_layout()
        return _save(fig, path)


def plot_pulse_family(records: Sequence[RunRecord], path: Path) -> Path:
    """Coherent photon pulses on the tau*sqrt(N) clock, one curve per mu0."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for r in _ok(records):
            q = normalize(params_from_dict(r.params))
            tr = r.trajectory
            ax.plot(tr.times * q.unified_time_factor, tr.component("N_c"), lw=1.0,
                    label=f"mu0 = {q.mu0:.3g}")
        ax.set_xlabel("tau sqrt(N)")
        ax.set_ylabel("N_c")
        ax.legend(fontsize=7, ncol=3)
        fig.tight_layout()
        return _save(fig, path)


def plot_pulse_train(record: RunRecord, path: Path) -> Path:
    """Pulse train and the running outflow against its predicted mean."""
    q = normalize(params_from_dict(record.params))
    tr = record.trajectory
    with plt.rc_context(_RC):
        fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
        top.plot(tr.times, tr.component("N_c"), color=SEP_COLOR, label="N_c")
        top.plot(tr.times, tr.component("M"), color="tab:green", lw=0.8, label="M")
        top.legend(fontsize=8)
        flow = q.theta * (tr.component("N_c") + tr.component("N_inc"))
        bottom.plot(tr.times, flow, color="tab:gray", lw=0.8,
                    label="theta (N_c + N_inc)")
        if q.I0 == 0:
            bottom.axhline(predicted_outflow(q), color="k", ls="--",
                           label="(Gamma~ theta + N0) / 2")
        bottom.set_xlabel("T")
        bottom.legend(fontsize=8)
        fig.tight_layout()
        return _save(fig, path)


def render_figure(name: str, records: Sequence[RunRecord], out_dir) -> list[Path]:
    out = Path(out_dir)
    if name == "fig1":
        return [plot_growth_curves(records, out / "fig1.svg")]
    if name in ("fig2", "fig3", "fig4", "fig5"):
        return [plot_model_pair(records, out / f"{name}.svg")]
    if name in ("fig6", "fig7"):
        return [plot_pulse_family(records, out / f"{name}.svg")]
    if name == "fig8":
        return [plot_pulse_train(records[0], out / "fig8.svg")] if _ok(records) else []
    return []
