"""Parameters, right-hand sides and closed-form results."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from masersim.errors import (
    NonPositiveLength,
    NonPositiveRadius,
    ParameterError,
    SchemaError,
    UnknownVariant,
    ZeroInversionScale,
    ZeroLoss,
)
from masersim.models import (
    InitialState,
    ModelVariant,
    NormalizedParams,
    PhysicalParams,
    angular_frequency,
    default_initial_state,
    einstein_alpha,
    gamma_from_convection,
    loss_from_radius,
    normalize,
    params_from_dict,
    physical,
    predicted_outflow,
    predicted_repetition_rate,
    pulsating_fixed_point,
    stationary_inversion,
    stationary_photons,
    threshold_mu_0th,
    threshold_mu_th1,
    threshold_mu_th2,
    vector_field,
)
from masersim.ode import IntegratorConfig, integrate

FIG8 = NormalizedParams(N0=0.05, theta=0.4, Gamma_tilde=0.1)


# -- normalization ----------------------------------------------------------------

def test_normalize_lossless():
    q = normalize(PhysicalParams(N_total=1e12, mu0=2e6))
    assert q.N0 == 0.25 and q.theta == 0.0
    assert q.Gamma_tilde == 0.0
    assert normalize(PhysicalParams(N_total=1e12, mu0=1e6)).N0 == 1.0


@pytest.mark.parametrize("delta, N0, mu0, theta", [
    (2e5, 0.05, 4.472e6, 0.045),
    (4e5, 0.01, 1e7, 0.04),
])
def test_loss_normalization(delta, N0, mu0, theta):
    m = math.sqrt(1e12 / N0)
    assert m == pytest.approx(mu0, rel=1e-3)
    q = normalize(PhysicalParams(N_total=1e12, mu0=m, delta=delta))
    assert q.theta == pytest.approx(theta, rel=1e-2)
    assert q.N0 == pytest.approx(N0, rel=1e-12)


@given(N=st.floats(1.0, 1e15), mu0=st.floats(1.0, 1e9), delta=st.floats(0.0, 1e7),
       Gamma=st.floats(0.0, 10.0))
def test_normalization_round_trip(N, mu0, delta, Gamma):
    p = PhysicalParams(N_total=N, mu0=mu0, delta=delta, Gamma=Gamma)
    q = normalize(p)
    assert q.N0 * mu0**2 == pytest.approx(N, rel=1e-14)
    back = physical(q)
    assert back.mu0 == pytest.approx(mu0, rel=1e-12)
    assert back.delta == pytest.approx(delta, rel=1e-12, abs=1e-300)
    assert back.Gamma == pytest.approx(Gamma, abs=1e-12)


def test_zero_inversion_scale():
    with pytest.raises(ZeroInversionScale):
        normalize(PhysicalParams(N_total=1e12, mu0=0.0))


@pytest.mark.parametrize("kwargs", [
    dict(N0=0.0), dict(N0=1.0, theta=-0.1), dict(N0=1.0, I0=-1.0),
    dict(N0=1.0, spontaneous_source_factor=0.7), dict(N0=1.0, N_total=0.0),
])
def test_normalized_params_validated(kwargs):
    with pytest.raises(ParameterError):
        NormalizedParams(**kwargs)


def test_params_dict_round_trip_and_strictness():
    for p in (FIG8, PhysicalParams(N_total=1e12, mu0=3e6, delta=1e5)):
        assert params_from_dict(p.to_dict()) == p
    with pytest.raises(SchemaError):
        params_from_dict({"kind": "normalized", "N0": 1.0, "colour": 2})
    with pytest.raises(SchemaError):
        params_from_dict({"N0": 1.0})


def test_variant_parsing():
    assert ModelVariant.parse("SEP_NORM") is ModelVariant.SEP_NORM
    assert ModelVariant.parse("trad-dim") is ModelVariant.TRAD_DIM
    with pytest.raises(UnknownVariant):
        ModelVariant.parse("quantum")
    assert ModelVariant.SEP_DIM.labels == ("n2", "mu", "N_inc", "N_c")
    assert ModelVariant.TRAD_NORM.labels == ("M1", "N1")


# -- right-hand sides -------------------------------------------------------------

def test_traditional_normalized_rhs():
    f = vector_field("trad-norm", NormalizedParams(N0=0.05))
    np.testing.assert_allclose(f.eval(0.0, [1.0, 0.01]), [-0.07, 0.035], rtol=1e-14)


@given(M=st.floats(-2, 2), Ninc=st.floats(0, 5), N0=st.floats(1e-3, 30),
       theta=st.floats(0, 1), factor=st.sampled_from([0.5, 1.0]))
def test_coherent_field_never_self_starts(M, Ninc, N0, theta, factor):
    f = vector_field("sep-norm", NormalizedParams(N0=N0, theta=theta,
                                                  spontaneous_source_factor=factor))
    d = f.eval(0.0, [M, Ninc, 0.0])
    assert d[2] == 0.0
    assert d[1] == pytest.approx(factor * N0 - theta * Ninc)


def test_separated_rhs_terms():
    f = vector_field("sep-norm", NormalizedParams(N0=0.2, theta=0.1))
    M, Ninc, Nc = 0.7, 0.3, 0.05
    np.testing.assert_allclose(
        f.eval(0.0, [M, Ninc, Nc]),
        [-0.2 - 2 * M * Nc, 0.1 - 0.1 * Ninc, (M - 0.1) * Nc], rtol=1e-14)


def test_pulsating_rhs_terms():
    q = NormalizedParams(N0=0.05, theta=0.4, Gamma_tilde=0.1, I0=0.02)
    M, Ninc, Nc = 0.5, 0.2, 0.3
    np.testing.assert_allclose(
        vector_field("puls-norm", q).eval(0.0, [M, Ninc, Nc]),
        [0.1 * M - 2 * M * Nc + 0.04, 0.025 - 0.4 * Ninc, (M - 0.4) * Nc], rtol=1e-14)


def test_dimensional_rhs_scaled_to_T():
    p = PhysicalParams(N_total=1e12, mu0=2e6, alpha=0.5)
    n2, mu, nk = 5.1e11, 1.5e6, 4e4
    d = vector_field("trad-dim", p).eval(0.0, [n2, mu, nk])
    src = 0.5 * n2 + mu * nk
    np.testing.assert_allclose(d, np.array([-src, -2 * src, src]) / 2e6, rtol=1e-14)
    n2, mu, ninc, nc = 5.1e11, 1.5e6, 1e5, 4e4
    d = vector_field("sep-dim", p).eval(0.0, [n2, mu, ninc, nc])
    np.testing.assert_allclose(
        d, np.array([-n2 - mu * nc, -2 * n2 - 2 * mu * nc, n2, mu * nc]) / 2e6, rtol=1e-14)


def test_fixed_point_zeroes_pulsating_field():
    fp = pulsating_fixed_point(FIG8)
    assert fp == pytest.approx((0.4, 0.0625, 0.05), rel=1e-14)
    assert np.max(np.abs(vector_field("puls-norm", FIG8).eval(0.0, fp))) < 1e-12


@given(theta=st.floats(0.01, 2), gt=st.floats(0, 2), I0=st.floats(0, 1), N0=st.floats(1e-3, 1))
def test_fixed_point_residual_property(theta, gt, I0, N0):
    q = NormalizedParams(N0=N0, theta=theta, Gamma_tilde=gt, I0=I0)
    fp = pulsating_fixed_point(q)
    assert fp[2] == pytest.approx((gt * theta + 2 * I0) / (2 * theta))
    assert np.max(np.abs(vector_field("puls-norm", q).eval(0.0, fp))) < 1e-12


def test_fixed_point_special_cases():
    assert pulsating_fixed_point(NormalizedParams(N0=0.05, theta=0.3, Gamma_tilde=0.4))[2] \
        == pytest.approx(0.2)
    assert pulsating_fixed_point(NormalizedParams(N0=0.05, theta=0.3))[2] == 0.0
    with pytest.raises(ZeroLoss):
        pulsating_fixed_point(NormalizedParams(N0=0.05, theta=0.0))


# -- closed forms -----------------------------------------------------------------

def test_thresholds():
    assert threshold_mu_th1(PhysicalParams(N_total=1e12, mu0=1e6, delta=4e5)) == 4e5
    assert threshold_mu_th1(PhysicalParams(N_total=1e12, mu0=1e6)) == 0.0
    assert threshold_mu_th2(1e12) == 2e6
    assert threshold_mu_th2(1.0) == 2.0
    assert threshold_mu_th2(4e12) == 4e6
    assert threshold_mu_0th(1e12) == 1e6


def test_loss_threshold_meets_emission_threshold():
    N = 1e12
    p = PhysicalParams(N_total=N, mu0=threshold_mu_th2(N), delta=threshold_mu_th2(N))
    assert threshold_mu_th1(p) == threshold_mu_th2(N)


def test_stationary_inversion_examples():
    assert stationary_inversion(0.0, 1e12) == -1e6
    assert stationary_inversion(2e7, 1e12) == pytest.approx(-4.9876e4, rel=1e-4)
    assert stationary_inversion(2e7, 1e12) == pytest.approx(-1e12 / 2e7, rel=5e-3)
    assert stationary_inversion(3.0, 0.0) == 0.0


def test_stationary_inversion_matches_high_precision():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 40
    exact = mpmath.mpf(1e7) - mpmath.sqrt(mpmath.mpf(1e7) ** 2 + mpmath.mpf(1e12))
    assert stationary_inversion(2e7, 1e12) == pytest.approx(float(exact), rel=1e-9)


@given(mu0=st.floats(-1e8, 1e8), N=st.floats(1.0, 1e14))
def test_stationary_inversion_solves_quadratic(mu0, N):
    m = stationary_inversion(mu0, N)
    assert m <= 0
    scale = max(m * m, abs(mu0 * m), N)
    assert abs(m * m - mu0 * m - N) <= 1e-12 * scale


@given(mu0=st.floats(0, 1e8), N=st.floats(1.0, 1e14), k=st.floats(1.01, 100))
def test_stationary_inversion_decreases_in_N(mu0, N, k):
    assert stationary_inversion(mu0, N * k) < stationary_inversion(mu0, N)


def test_stationary_photons_superradiant_limit():
    assert stationary_photons(2e7, 1e12) == pytest.approx(1.0025e7, rel=1e-4)
    assert stationary_photons(2e7, 1e12) == pytest.approx(1e7, rel=5e-3)
    assert stationary_photons(0.0, 0.0) == 0.0


@pytest.mark.xfail(strict=True, reason="(mu0 - mu_st)/2 at mu0 = 0 is sqrt(N)/2, not sqrt(N); "
                                       "see the decisions ledger")
def test_stationary_photons_weak_inversion_limit():
    assert stationary_photons(0.0, 1e12) == pytest.approx(1e6, rel=1e-9)


def test_einstein_alpha_anchors():
    w580 = angular_frequency(580e-7)
    assert w580 == pytest.approx(3.25e15, rel=2e-3)
    assert einstein_alpha(w580) == pytest.approx(0.25, rel=0.02)
    assert 0.54 <= einstein_alpha(4.8e15) <= 0.6
    assert einstein_alpha(0.0) == 0.0


def test_convective_drive():
    assert gamma_from_convection(2.0, 1.0) == 2.0
    assert gamma_from_convection(0.0, 3.0) == 0.0
    assert gamma_from_convection(2.1, 1.0) - 2.0 == pytest.approx(0.1)
    with pytest.raises(NonPositiveLength):
        gamma_from_convection(1.0, 0.0)


@given(R=st.floats(1e-3, 1e20))
def test_radiation_loss_scaling(R):
    assert loss_from_radius(2 * R) == pytest.approx(loss_from_radius(R) / 2, rel=1e-15)


def test_radiation_loss_values():
    assert loss_from_radius(3e10, 3e10) == 1.0
    assert loss_from_radius(1e300) < 1e-289
    with pytest.raises(NonPositiveRadius):
        loss_from_radius(0.0)


def test_repetition_rate():
    r = predicted_repetition_rate(FIG8)
    assert r.rate == pytest.approx(0.2)
    assert r.period == pytest.approx(2 * math.pi / 0.2)
    assert r.valid
    assert predicted_repetition_rate(NormalizedParams(N0=0.05, theta=0.4)).rate == 0.0


def test_repetition_rate_equals_linearized_eigenfrequency():
    # oracle: imaginary part of the Jacobian eigenvalues at the fixed point
    fp = np.array(pulsating_fixed_point(FIG8))
    f = vector_field("puls-norm", FIG8)
    h = 1e-7
    jac = np.column_stack([(f.eval(0.0, fp + h * e) - f.eval(0.0, fp - h * e)) / (2 * h)
                           for e in np.eye(3)])
    omega = np.max(np.abs(np.linalg.eigvals(jac).imag))
    assert omega == pytest.approx(predicted_repetition_rate(FIG8).rate, rel=1e-6)
    assert omega == pytest.approx(math.sqrt(0.4 * 0.1 + 2 * 0.0), rel=1e-6)


def test_predicted_outflow():
    assert predicted_outflow(FIG8) == pytest.approx(0.045)
    assert predicted_outflow(NormalizedParams(N0=0.05, theta=0.4)) == pytest.approx(0.025)
    m, ninc, nc = pulsating_fixed_point(FIG8)
    assert FIG8.theta * (nc + ninc) == pytest.approx(predicted_outflow(FIG8), rel=1e-14)
    with pytest.raises(ParameterError):
        predicted_outflow(NormalizedParams(N0=0.05, theta=0.4, I0=0.1))


# -- initial states ---------------------------------------------------------------

def test_default_initial_states():
    s = default_initial_state("sep-norm", PhysicalParams(N_total=1e12, mu0=1e6))
    assert s.to_dict() == {"M": 1.0, "N_inc": 0.03, "N_c": 0.03}
    s = default_initial_state("trad-norm", PhysicalParams(N_total=1e12, mu0=3e4))
    assert s.to_dict() == {"M1": 1.0, "N1": 1.0}
    s = default_initial_state("trad-dim", PhysicalParams(N_total=1e12, mu0=2e6))
    assert s.values == (5.00001e11, 2e6, 3e4)
    s = default_initial_state("sep-norm", NormalizedParams(N0=1.0))
    assert s.values == (1.0, 0.03, 0.03)


def test_initial_state_mapping_strict():
    s = InitialState.from_mapping(ModelVariant.TRAD_NORM, {"N1": 0.1, "M1": 0.9})
    assert s.values == (0.9, 0.1)
    with pytest.raises(SchemaError):
        InitialState.from_mapping(ModelVariant.TRAD_NORM, {"M": 1.0, "N1": 0.1})


# -- invariants along trajectories ------------------------------------------------

@given(N0=st.floats(0.01, 5.0), nc0=st.floats(1e-6, 0.5))
def test_coherent_photons_stay_non_negative(N0, nc0):
    q = NormalizedParams(N0=N0, theta=0.05)
    tr = integrate(vector_field("sep-norm", q), [1.0, nc0, nc0],
                   IntegratorConfig(t_end=10.0, sample_interval=0.1))
    assert np.all(tr.component("N_c") >= 0)


def test_zero_coherent_photons_stay_zero():
    tr = integrate(vector_field("sep-norm", NormalizedParams(N0=0.5)), [1.0, 0.1, 0.0],
                   IntegratorConfig(t_end=10.0))
    assert np.all(tr.component("N_c") == 0.0)


def test_dimensional_photon_count_conserved_for_any_alpha():
    for alpha in (0.25, 1.0, 3.0):
        p = PhysicalParams(N_total=1e12, mu0=2e6, alpha=alpha)
        tr = integrate(vector_field("trad-dim", p), default_initial_state("trad-dim", p).as_array(),
                       IntegratorConfig(t_end=5.0))
        n2, mu, nk = tr.states.T
        q = mu + 2 * nk
        assert np.max(np.abs(q - q[0])) / abs(q[0]) < 1e-8
