"""Explicit Runge-Kutta integration of small non-stiff systems.

Two methods share one sampling contract: the trajectory is reported on the
grid ``k * sample_interval`` (plus ``t_end`` when it is off-grid), so results
of different methods can be compared sample by sample.

* ``rk45`` -- Dormand-Prince 5(4) with PI step-size control, local
  extrapolation and the pair's quartic continuous extension for sampling.
* ``rk4`` -- classical fourth-order Runge-Kutta with a fixed step, sampled
  through cubic Hermite interpolation (exact step values when the sample grid
  is a multiple of the step).

The stepping loops are written once in a numba-compatible subset of Python.
Vector fields built from jitted kernels run compiled and release the GIL;
arbitrary Python callables run through the same source uncompiled.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Sequence

import numba
import numpy as np

from .errors import (
    ConfigError,
    MaxStepsExceeded,
    NonFiniteState,
    NonPositiveComponent,
    StepUnderflow,
)

__all__ = [
    "VectorField",
    "IntegratorConfig",
    "StepStats",
    "Trajectory",
    "LogGrowth",
    "integrate",
    "sample_times",
    "derivative_of_log",
]

METHODS = ("rk45", "rk4")

_OK, _NONFINITE, _UNDERFLOW, _MAXSTEPS = 0, 1, 2, 3

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
# b - b_hat
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])
# Quartic continuous extension (Shampine), columns multiply theta**1..4.
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_EPS = 2.220446049250313e-16


@numba.njit(cache=True, nogil=True)
def _all_finite(v):
    for i in range(v.size):
        if not np.isfinite(v[i]):
            return False
    return True


@numba.njit(cache=True, nogil=True)
def _dopri_loop(f, y0, p, t_end, rtol, atol, h0, hmax, max_steps, ts):
    n = y0.size
    ns = ts.size
    out = np.empty((ns, n))
    out[0, :] = y0
    k = 1
    K = np.empty((7, n))
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    t = 0.0
    h = min(h0, hmax)
    accepted = 0
    rejected = 0
    facold = 1e-4
    last_rejected = False
    last_nonfinite = False

    f(t, y, p, K[0])
    if not _all_finite(K[0]):
        return out, accepted, rejected, _NONFINITE, t

    while t < t_end:
        if accepted + rejected >= max_steps:
            return out, accepted, rejected, _MAXSTEPS, t
        if h <= 10.0 * _EPS * max(abs(t), 1.0):
            status = _NONFINITE if last_nonfinite else _UNDERFLOW
            return out, accepted, rejected, status, t
        last_step = False
        if t + 1.01 * h >= t_end:
            h = t_end - t
            last_step = True

        for s in range(1, 7):
            for i in range(n):
                acc = 0.0
                for j in range(s):
                    acc += _A[s, j] * K[j, i]
                ytmp[i] = y[i] + h * acc
            if s < 6:
                f(t + _C[s] * h, ytmp, p, K[s])
        for i in range(n):
            ynew[i] = ytmp[i]
        t_new = t_end if last_step else t + h
        f(t_new, ynew, p, K[6])

        errnorm = 0.0
        finite = _all_finite(ynew) and _all_finite(K[6])
        if finite:
            for i in range(n):
                e = 0.0
                for j in range(7):
                    e += _E[j] * K[j, i]
                sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                r = abs(h * e) / sc
                if r > errnorm:
                    errnorm = r
            finite = np.isfinite(errnorm)

        if not finite:
            rejected += 1
            last_rejected = True
            last_nonfinite = True
            h *= _FAC_MIN
            continue
        last_nonfinite = False

        fac11 = errnorm ** _EXPO
        if errnorm <= 1.0:
            while k < ns and ts[k] <= t_new:
                if ts[k] == t_new:
                    for i in range(n):
                        out[k, i] = ynew[i]
                else:
                    th = (ts[k] - t) / h
                    for i in range(n):
                        acc = 0.0
                        for s in range(7):
                            q = th * (_P[s, 0] + th * (_P[s, 1] + th * (_P[s, 2] + th * _P[s, 3])))
                            acc += K[s, i] * q
                        out[k, i] = y[i] + h * acc
                k += 1
            accepted += 1
            facold = max(errnorm, 1e-4)
            fac = fac11 / facold ** _BETA
            fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFETY))
            h_next = h / fac
            if last_rejected:
                h_next = min(h_next, h)
            last_rejected = False
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
                K[0, i] = K[6, i]
            h = min(h_next, hmax)
        else:
            rejected += 1
            last_rejected = True
            h = h / min(1.0 / _FAC_MIN, fac11 / _SAFETY)

    while k < ns:
        for i in range(n):
            out[k, i] = y[i]
        k += 1
    return out, accepted, rejected, _OK, t


@numba.njit(cache=True, nogil=True)
def _rk4_loop(f, y0, p, t_end, h, ts):
    n = y0.size
    ns = ts.size
    out = np.empty((ns, n))
    out[0, :] = y0
    k = 1
    y = y0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    fnew = np.empty(n)
    ytmp = np.empty(n)
    ynew = np.empty(n)
    nsteps = int(math.ceil(t_end / h * (1.0 - 1e-12)))

    f(0.0, y, p, k1)
    if not _all_finite(k1):
        return out, 0, 0, _NONFINITE, 0.0
    t = 0.0
    for step in range(nsteps):
        t = step * h
        hh = h
        if step == nsteps - 1:
            rem = t_end - t
            if rem < h * (1.0 - 1e-9):
                hh = rem
        t_new = t_end if step == nsteps - 1 else (step + 1) * h
        for i in range(n):
            ytmp[i] = y[i] + 0.5 * hh * k1[i]
        f(t + 0.5 * hh, ytmp, p, k2)
        for i in range(n):
            ytmp[i] = y[i] + 0.5 * hh * k2[i]
        f(t + 0.5 * hh, ytmp, p, k3)
        for i in range(n):
            ytmp[i] = y[i] + hh * k3[i]
        f(t + hh, ytmp, p, k4)
        for i in range(n):
            ynew[i] = y[i] + hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        f(t_new, ynew, p, fnew)
        if not (_all_finite(ynew) and _all_finite(fnew)):
            return out, step, 0, _NONFINITE, t
        while k < ns and ts[k] <= t_new + 1e-9 * hh:
            th = (ts[k] - t) / hh
            if abs(th - 1.0) < 1e-9:
                for i in range(n):
                    out[k, i] = ynew[i]
            else:
                # cubic Hermite on (y, f) at both ends of the step
                h00 = (1.0 + 2.0 * th) * (1.0 - th) ** 2
                h10 = th * (1.0 - th) ** 2
                h01 = th * th * (3.0 - 2.0 * th)
                h11 = th * th * (th - 1.0)
                for i in range(n):
                    out[k, i] = (h00 * y[i] + h10 * hh * k1[i]
                                 + h01 * ynew[i] + h11 * hh * fnew[i])
            k += 1
        for i in range(n):
            y[i] = ynew[i]
            k1[i] = fnew[i]
        t = t_new
    while k < ns:
        for i in range(n):
            out[k, i] = y[i]
        k += 1
    return out, nsteps, 0, _OK, t


def _python_kernel(func):
    def kernel(t, y, p, out):
        out[:] = func(t, y)
    return kernel


@dataclass(frozen=True, eq=False)
class VectorField:
    """Right-hand side ``dy/dT = f(T, y)`` of an autonomous or driven system.

    ``kernel(t, y, params, out)`` writes the derivative into ``out``. Set
    ``compiled`` when the kernel is a numba ``njit`` function so the stepping
    loops can run in machine code.
    """

    dimension: int
    kernel: Callable
    component_labels: tuple[str, ...]
    params: np.ndarray = np.empty(0)
    compiled: bool = False

    def __post_init__(self):
        if self.dimension <= 0:
            raise ConfigError("dimension must be positive")
        if len(self.component_labels) != self.dimension:
            raise ConfigError("one label per component required")

    @classmethod
    def from_function(cls, func: Callable, labels: Sequence[str]) -> "VectorField":
        """Wrap ``func(t, y) -> sequence`` as a vector field."""
        return cls(len(labels), _python_kernel(func), tuple(labels))

    def eval(self, t: float, y) -> np.ndarray:
        out = np.empty(self.dimension)
        self.kernel(float(t), np.asarray(y, dtype=float), self.params, out)
        return out


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-200  # photon pools decay through ~80 decades; keep control relative
    initial_step: float = 1e-4
    max_step: float = 0.1
    max_steps: int = 100_000_000
    t_end: float = 20.0
    sample_interval: float = 0.01

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        values = (self.rel_tol, self.abs_tol, self.initial_step, self.max_step,
                  self.t_end, self.sample_interval)
        if not all(math.isfinite(float(v)) for v in values):
            raise ConfigError("integrator settings must be finite")
        checks = {
            "rel_tol": self.rel_tol > 0,
            "abs_tol": self.abs_tol > 0,
            "initial_step": 0 < self.initial_step <= self.max_step,
            "t_end": self.t_end > 0,
            "sample_interval": self.sample_interval > 0,
            "max_steps": self.max_steps > 0,
        }
        for name, ok in checks.items():
            if not ok:
                raise ConfigError(f"invalid integrator setting: {name}")

    def to_dict(self) -> dict:
        return asdict(self)


class StepStats(NamedTuple):
    accepted: int
    rejected: int


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    labels: tuple[str, ...]
    config: IntegratorConfig | None = None
    step_stats: StepStats = StepStats(0, 0)

    def __post_init__(self):
        self.times.setflags(write=False)
        self.states.setflags(write=False)

    def __len__(self) -> int:
        return self.times.size

    def index(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise KeyError(f"no component {name!r}; have {self.labels}") from None

    def component(self, name: str) -> np.ndarray:
        return self.states[:, self.index(name)]

    def rescaled(self, factor: float) -> "Trajectory":
        """Same samples on the time axis ``factor * T``."""
        return Trajectory(self.times * factor, self.states.copy(), self.labels,
                          self.config, self.step_stats)


def sample_times(t_end: float, interval: float) -> np.ndarray:
    """Grid ``k * interval`` on [0, t_end], closed with ``t_end`` itself."""
    n = int(math.floor(t_end / interval * (1 + 1e-12)))
    times = np.arange(n + 1, dtype=float) * interval
    if abs(times[-1] - t_end) <= 1e-9 * interval or times[-1] > t_end:
        times[-1] = t_end
    else:
        times = np.append(times, t_end)
    return times


def integrate(field: VectorField, y0, cfg: IntegratorConfig) -> Trajectory:
    y0 = np.array(y0, dtype=float).ravel()
    if y0.size != field.dimension:
        raise ConfigError(f"initial state has {y0.size} entries, field has {field.dimension}")
    if not np.all(np.isfinite(y0)):
        raise NonFiniteState("initial state is not finite", 0.0)
    ts = sample_times(cfg.t_end, cfg.sample_interval)
    params = np.ascontiguousarray(field.params, dtype=float)

    if cfg.method == "rk4":
        nsteps = math.ceil(cfg.t_end / cfg.initial_step * (1 - 1e-12))
        if nsteps > cfg.max_steps:
            raise MaxStepsExceeded(
                f"fixed step {cfg.initial_step} needs {nsteps} steps > max_steps", 0.0)
        loop = _rk4_loop if field.compiled else _rk4_loop.py_func
        out, acc, rej, status, t_fail = loop(field.kernel, y0, params, cfg.t_end,
                                             cfg.initial_step, ts)
    else:
        loop = _dopri_loop if field.compiled else _dopri_loop.py_func
        out, acc, rej, status, t_fail = loop(
            field.kernel, y0, params, cfg.t_end, cfg.rel_tol, cfg.abs_tol,
            cfg.initial_step, cfg.max_step, cfg.max_steps, ts)

    if status == _NONFINITE:
        raise NonFiniteState(f"state or derivative became non-finite near T={t_fail:.6g}", t_fail)
    if status == _UNDERFLOW:
        raise StepUnderflow(f"step size underflow at T={t_fail:.6g}", t_fail)
    if status == _MAXSTEPS:
        raise MaxStepsExceeded(f"max_steps={cfg.max_steps} reached at T={t_fail:.6g}", t_fail)
    out[0] = y0
    return Trajectory(ts, out, field.component_labels, cfg, StepStats(int(acc), int(rej)))


class LogGrowth(NamedTuple):
    """Samples of ln(d ln N / dT); ``values`` is masked where the rate is <= 0."""

    times: np.ndarray
    values: np.ma.MaskedArray

    @property
    def rate(self) -> np.ma.MaskedArray:
        return np.ma.exp(self.values)


def derivative_of_log(traj: Trajectory, component: str) -> LogGrowth:
    x = traj.component(component)
    if np.any(x <= 0):
        t_bad = traj.times[np.argmax(x <= 0)]
        raise NonPositiveComponent(f"{component} is not positive at T={t_bad:.6g}")
    # second-order central differences inside, one-sided at the ends
    # shifting by ln x[0] keeps a constant signal at an exact zero derivative
    rate = np.gradient(np.log(x) - math.log(x[0]), traj.times, edge_order=2)
    positive = rate > 0
    logs = np.zeros_like(rate)
    logs[positive] = np.log(rate[positive])
    return LogGrowth(traj.times.copy(), np.ma.masked_array(logs, mask=~positive))
