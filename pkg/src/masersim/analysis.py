"""Observables extracted from trajectories.

Pulse-shape metrics, growth-rate summaries, pulse-train statistics,
time-averaged radiation outflow and conservation drift.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import (
    EmptyWindow,
    FewerThanTwoPeaks,
    NoConservedQuantity,
    NoPulse,
    UnboundedPulse,
)
from .models import (
    ModelVariant,
    NormalizedParams,
    Params,
    normalize,
    predicted_repetition_rate,
)
from .ode import LogGrowth, Trajectory

DEFAULT_PROMINENCE = 0.05


@dataclass(frozen=True)
class PulseMetrics:
    peak_time: float
    peak_value: float
    fwhm: float
    leading_edge: float
    trailing_edge: float
    edge_ratio: float
    rise10_time: float | None

    def rescaled(self, factor: float) -> "PulseMetrics":
        """Metrics on the time axis ``factor * T``."""
        rise = None if self.rise10_time is None else self.rise10_time * factor
        return PulseMetrics(self.peak_time * factor, self.peak_value, self.fwhm * factor,
                            self.leading_edge * factor, self.trailing_edge * factor,
                            self.edge_ratio, rise)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PulseTrain:
    peak_times: tuple[float, ...]
    peak_values: tuple[float, ...]
    spacings: tuple[float, ...]
    mean_period: float
    period_cv: float
    mean_peak_value: float

    @property
    def count(self) -> int:
        return len(self.peak_times)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["count"] = self.count
        return d


@dataclass(frozen=True)
class FluxSummary:
    window: tuple[float, float]
    mean_coherent_outflow: float
    mean_incoherent_outflow: float
    mean_total_outflow: float

    def to_dict(self) -> dict:
        return asdict(self)


def _parabola_vertex(t, x, i):
    """Refine a sampled maximum at index i with the parabola through i-1, i, i+1."""
    t0, t1, t2 = t[i - 1], t[i], t[i + 1]
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    d0 = (x1 - x0) / (t1 - t0)
    d1 = (x2 - x1) / (t2 - t1)
    a = (d1 - d0) / (t2 - t0)
    if a >= 0:
        return t1, x1
    b = d0 - a * (t0 + t1)
    tv = -b / (2 * a)
    if not (t0 <= tv <= t2):
        return t1, x1
    xv = x1 + (tv - t1) * (d0 + a * (tv - t0))
    return float(tv), float(max(xv, x1))


def _crossing(t, x, j, level):
    """Time where the segment between samples j and j+1 passes through level."""
    x0, x1 = x[j], x[j + 1]
    if x1 == x0:
        return float(t[j])
    return float(t[j] + (level - x0) * (t[j + 1] - t[j]) / (x1 - x0))


def pulse_metrics(traj: Trajectory, component: str) -> PulseMetrics:
    """Shape of the dominant pulse of one component.

    The peak is the largest sample refined by a three-point parabola;
    half-maximum crossings are linear interpolations between samples.
    Raises ``NoPulse`` when the maximum sits on the window edge (monotone or
    flat signal) and ``UnboundedPulse`` when the signal does not cross half
    maximum on both sides of the peak inside the window.
    """
    t = traj.times
    x = traj.component(component)
    i = int(np.argmax(x))
    if x.size < 3 or i == 0 or i == x.size - 1 or x[i] <= 0 or np.all(x == x[i]):
        raise NoPulse(f"{component}: no interior maximum")
    tp, xp = _parabola_vertex(t, x, i)
    half = 0.5 * xp

    below = np.nonzero(x[:i] < half)[0]
    if below.size == 0:
        raise UnboundedPulse(f"{component}: already above half maximum at window start")
    t_up = _crossing(t, x, int(below[-1]), half)
    after = np.nonzero(x[i:] < half)[0]
    if after.size == 0:
        raise UnboundedPulse(f"{component}: does not fall below half maximum before window end")
    j = i + int(after[0])
    t_down = _crossing(t, x, j - 1, half)

    lead = tp - t_up
    trail = t_down - tp
    below10 = np.nonzero(x[:i] < 0.1 * xp)[0]
    rise10 = tp - _crossing(t, x, int(below10[-1]), 0.1 * xp) if below10.size else None
    return PulseMetrics(
        peak_time=tp,
        peak_value=xp,
        fwhm=lead + trail,
        leading_edge=lead,
        trailing_edge=trail,
        edge_ratio=trail / lead if lead > 0 else math.inf,
        rise10_time=rise10,
    )


def detect_pulse_train(traj: Trajectory, component: str,
                       prominence_frac: float = DEFAULT_PROMINENCE,
                       settle_time: float | None = None) -> PulseTrain:
    """Peaks whose topographic prominence exceeds a fraction of the signal range.

    Peaks earlier than ``settle_time`` are dropped (transient suppression).
    """
    if not 0 < prominence_frac < 1:
        raise ValueError("prominence_frac must lie in (0, 1)")
    t = traj.times
    x = traj.component(component)
    span = float(x.max() - x.min())
    if span <= 0:
        raise FewerThanTwoPeaks(f"{component} is constant")
    idx, _ = find_peaks(x, prominence=prominence_frac * span)
    peaks = [_parabola_vertex(t, x, int(i)) for i in idx if 0 < i < x.size - 1]
    if settle_time is not None:
        peaks = [pk for pk in peaks if pk[0] >= settle_time]
    if len(peaks) < 2:
        raise FewerThanTwoPeaks(f"{component}: {len(peaks)} peak(s) detected")
    times = np.array([pk[0] for pk in peaks])
    values = np.array([pk[1] for pk in peaks])
    spacings = np.diff(times)
    mean = float(spacings.mean())
    return PulseTrain(
        peak_times=tuple(times.tolist()),
        peak_values=tuple(values.tolist()),
        spacings=tuple(spacings.tolist()),
        mean_period=mean,
        period_cv=float(spacings.std() / mean),
        mean_peak_value=float(values.mean()),
    )


def settle_time(params: NormalizedParams, periods: float = 5.0) -> float:
    """Time covering ``periods`` predicted small-oscillation periods."""
    return periods * predicted_repetition_rate(params).period


def _window_mean(t, x, t0, t1):
    inside = (t > t0) & (t < t1)
    tt = np.concatenate(([t0], t[inside], [t1]))
    xx = np.concatenate(([np.interp(t0, t, x)], x[inside], [np.interp(t1, t, x)]))
    return float(np.trapezoid(xx, tt) / (t1 - t0))


def time_averaged_outflow(traj: Trajectory, theta: float,
                          window: tuple[float, float]) -> FluxSummary:
    t0, t1 = float(window[0]), float(window[1])
    t = traj.times
    if not (t1 > t0) or t0 < t[0] or t1 > t[-1]:
        raise EmptyWindow(f"window ({t0}, {t1}) is empty or outside [{t[0]}, {t[-1]}]")
    coh = theta * _window_mean(t, traj.component("N_c"), t0, t1)
    inc = theta * _window_mean(t, traj.component("N_inc"), t0, t1)
    return FluxSummary((t0, t1), coh, inc, coh + inc)


def outflow_window(traj: Trajectory, train: PulseTrain | None) -> tuple[float, float]:
    """Whole number of periods when a train exists, else the trailing half."""
    if train is not None and train.count >= 2:
        return train.peak_times[0], train.peak_times[-1]
    return float(traj.times[-1] / 2), float(traj.times[-1])


def _conserved_combinations(traj: Trajectory, variant: ModelVariant, params: Params | None):
    s = traj.states
    if variant is ModelVariant.TRAD_DIM:
        n2, mu, nk = s.T
        return [2 * n2 - mu, mu + 2 * nk]
    if variant is ModelVariant.SEP_DIM:
        n2, mu, ninc, nc = s.T
        return [2 * n2 - mu, mu + 2 * ninc + 2 * nc]
    q = normalize(params)
    if q.theta != 0:
        raise NoConservedQuantity(f"{variant.value} conserves nothing when theta > 0")
    if variant is ModelVariant.TRAD_NORM:
        return [s[:, 0] + 2 * s[:, 1]]
    if variant is ModelVariant.SEP_NORM:
        if q.spontaneous_source_factor != 0.5:
            raise NoConservedQuantity(
                "with the full N0 source, M + 2 N_inc + 2 N_c grows at rate N0")
        return [s[:, 0] + 2 * s[:, 1] + 2 * s[:, 2]]
    raise NoConservedQuantity(f"{variant.value} has no linear invariant")


def conserved_quantity_drift(traj: Trajectory, variant: ModelVariant | str,
                             params: Params | None = None) -> float:
    """Largest relative departure of the variant's invariant(s) from the start."""
    v = ModelVariant.parse(variant)
    drift = 0.0
    for q in _conserved_combinations(traj, v, params):
        drift = max(drift, float(np.max(np.abs(q - q[0])) / max(abs(q[0]), 1.0)))
    return drift


# -- growth-rate curves ---------------------------------------------------------

def growth_plateau(curve: LogGrowth, window: float = 1.0) -> float:
    """Highest level the log growth rate holds for at least ``window`` time units.

    Computed as the maximum over start times of the minimum of the curve on
    [start, start + window]; masked samples count as -inf. Returns -inf when
    the curve never holds any level that long.
    """
    t = curve.times
    v = curve.values.filled(-np.inf)
    best = -np.inf
    j = 0
    n = t.size
    dq: deque[int] = deque()  # sliding-window minimum
    for i in range(n):
        if t[i] + window > t[-1] + 1e-9 * window:
            break
        while j < n and t[j] <= t[i] + window * (1 + 1e-12):
            while dq and v[dq[-1]] >= v[j]:
                dq.pop()
            dq.append(j)
            j += 1
        while dq[0] < i:
            dq.popleft()
        best = max(best, v[dq[0]])
    return float(best)


def exponential_stage_duration(curve: LogGrowth, threshold: float) -> float:
    """Longest contiguous time span on which the growth rate stays >= threshold."""
    rate = curve.rate.filled(0.0)
    ok = rate >= threshold
    best = 0.0
    start = None
    t = curve.times
    for i, flag in enumerate(ok):
        if flag and start is None:
            start = t[i]
        if start is not None and (not flag or i == ok.size - 1):
            end = t[i] if flag else t[i - 1]
            best = max(best, float(end - start))
            start = None
    return best
