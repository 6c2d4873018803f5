"""Two-level emitter rate equations, their parameters and closed-form results.

Time is always the scaled variable ``T = w21 * mu0 * t``. The dimensional
variants keep populations and photon counts in absolute numbers but are
divided through by ``mu0`` so that every model shares the same clock.

State layouts::

    trad-dim   (n2, mu, N_k)
    sep-dim    (n2, mu, N_inc, N_c)
    trad-norm  (M1, N1)
    sep-norm   (M, N_inc, N_c)
    puls-norm  (M, N_inc, N_c)
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Union

import numba
import numpy as np

from .errors import (
    NonPositiveLength,
    NonPositiveRadius,
    ParameterError,
    UnknownVariant,
    ZeroInversionScale,
    ZeroLoss,
)
from .ode import VectorField

SPEED_OF_LIGHT_CGS = 2.998e10  # cm/s
REFERENCE_EMITTERS = 1e12
SEED_PHOTONS = 3e4


class ModelVariant(enum.Enum):
    TRAD_DIM = "trad-dim"
    SEP_DIM = "sep-dim"
    TRAD_NORM = "trad-norm"
    SEP_NORM = "sep-norm"
    PULS_NORM = "puls-norm"

    @classmethod
    def parse(cls, value: "ModelVariant | str") -> "ModelVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for v in cls:
            if v.value == key:
                return v
        raise UnknownVariant(f"unknown model variant {value!r}; "
                             f"expected one of {[v.value for v in cls]}")

    @property
    def labels(self) -> tuple[str, ...]:
        return _LABELS[self]

    @property
    def normalized(self) -> bool:
        return self in (ModelVariant.TRAD_NORM, ModelVariant.SEP_NORM, ModelVariant.PULS_NORM)


_LABELS = {
    ModelVariant.TRAD_DIM: ("n2", "mu", "N_k"),
    ModelVariant.SEP_DIM: ("n2", "mu", "N_inc", "N_c"),
    ModelVariant.TRAD_NORM: ("M1", "N1"),
    ModelVariant.SEP_NORM: ("M", "N_inc", "N_c"),
    ModelVariant.PULS_NORM: ("M", "N_inc", "N_c"),
}


@dataclass(frozen=True)
class PhysicalParams:
    """Parameters in emitter-count units (rates in units of w21).

    ``delta`` is the photon loss rate, ``alpha = u21/w21``, ``I0`` the
    collisional pump with (nu - u21) n1 = mu0**2 I0, ``Gamma`` the inversion
    drive and ``Nk0`` the initial photon count in each photon pool.
    """

    N_total: float
    mu0: float
    delta: float = 0.0
    alpha: float = 1.0
    I0: float = 0.0
    Gamma: float = 2.0
    Nk0: float = SEED_PHOTONS

    def __post_init__(self):
        if not self.N_total > 0:
            raise ParameterError("N_total must be positive")
        if self.delta < 0:
            raise ParameterError("delta must be non-negative")
        if not self.alpha > 0:
            raise ParameterError("alpha must be positive")
        if self.I0 < 0:
            raise ParameterError("I0 must be non-negative")
        if self.Nk0 < 0:
            raise ParameterError("Nk0 must be non-negative")

    def to_dict(self) -> dict:
        return {"kind": "physical", **asdict(self)}


@dataclass(frozen=True)
class NormalizedParams:
    """Dimensionless parameters of the normalized models.

    ``N_total`` is the emitter count the normalization refers to; together
    with ``N0`` it fixes the inversion scale ``mu0 = sqrt(N_total / N0)``,
    which sets the seed photon number of the default initial state.
    """

    N0: float
    theta: float = 0.0
    I0: float = 0.0
    Gamma_tilde: float = 0.0
    spontaneous_source_factor: float = 0.5
    N_total: float = REFERENCE_EMITTERS

    def __post_init__(self):
        if not self.N0 > 0:
            raise ParameterError("N0 must be positive")
        if self.theta < 0:
            raise ParameterError("theta must be non-negative")
        if self.I0 < 0:
            raise ParameterError("I0 must be non-negative")
        if self.spontaneous_source_factor not in (0.5, 1.0):
            raise ParameterError("spontaneous_source_factor must be 0.5 or 1.0")
        if not self.N_total > 0:
            raise ParameterError("N_total must be positive")

    @property
    def mu0(self) -> float:
        return math.sqrt(self.N_total / self.N0)

    @property
    def delta(self) -> float:
        return self.theta * self.mu0

    @property
    def unified_time_factor(self) -> float:
        """Multiply T by this to get tau * sqrt(N_total), a clock shared by all mu0."""
        return math.sqrt(self.N0)

    def to_dict(self) -> dict:
        return {"kind": "normalized", **asdict(self)}


Params = Union[PhysicalParams, NormalizedParams]


def params_from_dict(d: dict) -> Params:
    from .errors import SchemaError

    d = dict(d)
    kind = d.pop("kind", None)
    cls = {"physical": PhysicalParams, "normalized": NormalizedParams}.get(kind)
    if cls is None:
        raise SchemaError(f"params.kind must be 'physical' or 'normalized', got {kind!r}")
    allowed = set(cls.__dataclass_fields__)
    unknown = set(d) - allowed
    if unknown:
        raise SchemaError(f"unknown {kind} parameter(s): {sorted(unknown)}")
    try:
        return cls(**{k: float(v) for k, v in d.items()})
    except TypeError as exc:
        raise SchemaError(str(exc)) from None


def normalize(p: PhysicalParams, spontaneous_source_factor: float = 0.5) -> NormalizedParams:
    if isinstance(p, NormalizedParams):
        return p
    if p.mu0 <= 0:
        raise ZeroInversionScale("mu0 must be positive to normalize")
    return NormalizedParams(
        N0=p.N_total / p.mu0**2,
        theta=p.delta / p.mu0,
        I0=p.I0,
        Gamma_tilde=p.Gamma - 2.0,
        spontaneous_source_factor=spontaneous_source_factor,
        N_total=p.N_total,
    )


def physical(np_: NormalizedParams) -> PhysicalParams:
    """Inverse of :func:`normalize` (up to rounding)."""
    if isinstance(np_, PhysicalParams):
        return np_
    mu0 = np_.mu0
    return PhysicalParams(N_total=np_.N_total, mu0=mu0, delta=np_.theta * mu0,
                          I0=np_.I0, Gamma=np_.Gamma_tilde + 2.0)


# -- right-hand sides -----------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _trad_dim(t, y, p, out):
    alpha, mu0 = p[0], p[1]
    n2, mu, nk = y[0], y[1], y[2]
    out[0] = (-alpha * n2 - mu * nk) / mu0
    out[1] = (-2.0 * alpha * n2 - 2.0 * mu * nk) / mu0
    out[2] = (alpha * n2 + mu * nk) / mu0


@numba.njit(cache=True, nogil=True)
def _sep_dim(t, y, p, out):
    mu0 = p[0]
    n2, mu, nc = y[0], y[1], y[3]
    out[0] = (-n2 - mu * nc) / mu0
    out[1] = (-2.0 * n2 - 2.0 * mu * nc) / mu0
    out[2] = n2 / mu0
    out[3] = mu * nc / mu0


@numba.njit(cache=True, nogil=True)
def _trad_norm(t, y, p, out):
    n0, theta = p[0], p[1]
    m, n1 = y[0], y[1]
    out[0] = -n0 - 2.0 * m * n1
    out[1] = 0.5 * n0 + m * n1 - theta * n1


@numba.njit(cache=True, nogil=True)
def _sep_norm(t, y, p, out):
    n0, theta, factor = p[0], p[1], p[2]
    m, ninc, nc = y[0], y[1], y[2]
    out[0] = -n0 - 2.0 * m * nc
    out[1] = factor * n0 - theta * ninc
    out[2] = (m - theta) * nc


@numba.njit(cache=True, nogil=True)
def _puls_norm(t, y, p, out):
    n0, theta, g, i0 = p[0], p[1], p[2], p[3]
    m, ninc, nc = y[0], y[1], y[2]
    out[0] = g * m - 2.0 * m * nc + 2.0 * i0
    out[1] = 0.5 * n0 - theta * ninc
    out[2] = (m - theta) * nc


def vector_field(variant: ModelVariant | str, params: Params) -> VectorField:
    v = ModelVariant.parse(variant)
    if v is ModelVariant.TRAD_DIM:
        p = physical(params)
        if p.mu0 <= 0:
            raise ZeroInversionScale("dimensional variants run on T = mu0 * tau; mu0 must be > 0")
        kernel, vec = _trad_dim, [p.alpha, p.mu0]
    elif v is ModelVariant.SEP_DIM:
        p = physical(params)
        if p.mu0 <= 0:
            raise ZeroInversionScale("dimensional variants run on T = mu0 * tau; mu0 must be > 0")
        kernel, vec = _sep_dim, [p.mu0]
    else:
        q = normalize(params)
        if v is ModelVariant.TRAD_NORM:
            kernel, vec = _trad_norm, [q.N0, q.theta]
        elif v is ModelVariant.SEP_NORM:
            kernel, vec = _sep_norm, [q.N0, q.theta, q.spontaneous_source_factor]
        else:
            kernel, vec = _puls_norm, [q.N0, q.theta, q.Gamma_tilde, q.I0]
    return VectorField(len(v.labels), kernel, v.labels, np.array(vec, dtype=float), compiled=True)


# -- initial states -------------------------------------------------------------

@dataclass(frozen=True)
class InitialState:
    labels: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.values):
            raise ParameterError("one value per component required")

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def to_dict(self) -> dict:
        return dict(zip(self.labels, self.values))

    @classmethod
    def from_mapping(cls, variant: ModelVariant, values: dict) -> "InitialState":
        from .errors import SchemaError

        labels = variant.labels
        if set(values) != set(labels):
            raise SchemaError(f"initial state for {variant.value} needs exactly {labels}, "
                              f"got {sorted(values)}")
        return cls(labels, tuple(float(values[k]) for k in labels))


def default_initial_state(variant: ModelVariant | str, params: Params) -> InitialState:
    v = ModelVariant.parse(variant)
    if v.normalized:
        mu0 = params.mu0
        if mu0 <= 0:
            raise ZeroInversionScale("mu0 must be positive")
        seed = (params.Nk0 if isinstance(params, PhysicalParams) else SEED_PHOTONS) / mu0
        values = (1.0, seed) if v is ModelVariant.TRAD_NORM else (1.0, seed, seed)
    else:
        p = physical(params)
        n2 = (p.N_total + p.mu0) / 2.0
        if v is ModelVariant.TRAD_DIM:
            values = (n2, p.mu0, p.Nk0)
        else:
            values = (n2, p.mu0, p.Nk0, p.Nk0)
    return InitialState(v.labels, tuple(float(x) for x in values))


def perturbed_fixed_point_state(params: NormalizedParams, rel: float = 0.1) -> InitialState:
    """Pulsating-model fixed point with the inversion raised by ``rel``."""
    m, ninc, nc = pulsating_fixed_point(params)
    return InitialState(ModelVariant.PULS_NORM.labels, (m * (1.0 + rel), ninc, nc))


# -- closed forms ---------------------------------------------------------------

def threshold_mu_th1(p: PhysicalParams) -> float:
    """Loss threshold delta / w21 (w21 = 1 in these units)."""
    return float(p.delta)


def threshold_mu_th2(N_total: float) -> float:
    """Inversion at which spontaneous and stimulated emission balance, 2 sqrt(N)."""
    if not N_total > 0:
        raise ParameterError("N_total must be positive")
    return 2.0 * math.sqrt(N_total)


def threshold_mu_0th(N_total: float) -> float:
    """The sqrt(N) scale used to define N0 = 1; half of :func:`threshold_mu_th2`."""
    return threshold_mu_th2(N_total) / 2.0


def stationary_inversion(mu0: float, N_total: float) -> float:
    if N_total < 0:
        raise ParameterError("N_total must be non-negative")
    half = mu0 / 2.0
    root = math.sqrt(half * half + N_total)
    if half > 0:
        # rationalized form avoids cancellation when (mu0/2)^2 >> N
        return -N_total / (half + root) if N_total else 0.0
    return half - root


def stationary_photons(mu0: float, N_total: float) -> float:
    """Photon number reached when the inversion settles, with no seed photons."""
    return (mu0 - stationary_inversion(mu0, N_total)) / 2.0


def einstein_alpha(omega: float) -> float:
    """u21/w21 = 2 omega^2 / (pi c^3), omega in rad/s, c in cm/s."""
    if omega < 0:
        raise ParameterError("omega must be non-negative")
    return 2.0 * omega**2 / (math.pi * SPEED_OF_LIGHT_CGS**3)


def angular_frequency(wavelength_cm: float) -> float:
    return 2.0 * math.pi * SPEED_OF_LIGHT_CGS / wavelength_cm


def gamma_from_convection(v: float, L: float) -> float:
    if not L > 0:
        raise NonPositiveLength("L must be positive")
    if v < 0:
        raise ParameterError("v must be non-negative")
    return v / L


def loss_from_radius(R: float, c: float = SPEED_OF_LIGHT_CGS) -> float:
    if not R > 0:
        raise NonPositiveRadius("R must be positive")
    return c / R


def pulsating_fixed_point(params: NormalizedParams) -> tuple[float, float, float]:
    """Stationary (M, N_inc, N_c) of the pulsating model."""
    q = normalize(params)
    if not q.theta > 0:
        raise ZeroLoss("theta must be positive for a finite fixed point")
    th = q.theta
    return th, q.N0 / (2.0 * th), (q.Gamma_tilde * th + 2.0 * q.I0) / (2.0 * th)


class RepetitionRate(NamedTuple):
    rate: float
    period: float
    valid: bool


def predicted_repetition_rate(params: NormalizedParams) -> RepetitionRate:
    """sqrt(theta * Gamma_tilde) read as an angular frequency.

    ``valid`` reports whether Gamma_tilde > I0 / theta holds.
    """
    q = normalize(params)
    if q.theta < 0 or q.Gamma_tilde < 0:
        raise ParameterError("theta and Gamma_tilde must be non-negative")
    rate = math.sqrt(q.theta * q.Gamma_tilde)
    period = 2.0 * math.pi / rate if rate > 0 else math.inf
    valid = q.theta > 0 and q.Gamma_tilde > q.I0 / q.theta
    return RepetitionRate(rate, period, valid)


def predicted_outflow(params: NormalizedParams) -> float:
    """Mean radiation outflow theta (N_c + N_inc) of the pumped system, I0 = 0."""
    q = normalize(params)
    if q.I0 != 0:
        raise ParameterError("the outflow balance holds for I0 = 0 only")
    return (q.Gamma_tilde * q.theta + q.N0) / 2.0
