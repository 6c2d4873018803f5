"""Sweep specs, presets, execution and model comparison."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import masersim.sweep as sweep_mod
from masersim.errors import GridTooLarge, MismatchedGrids, SchemaError, UnknownPreset
from masersim.models import ModelVariant, NormalizedParams, PhysicalParams
from masersim.ode import IntegratorConfig
from masersim.sweep import (
    FIG1_N0,
    FIG6_MU0,
    PRESETS,
    SweepSpec,
    compare_models,
    figure_preset,
    resolve,
    run_sweep,
)

SMALL = IntegratorConfig(t_end=2.0, sample_interval=0.1)


def small_spec(**kw):
    base = dict(variant="trad-norm", base_params=NormalizedParams(N0=0.5),
                axes=(("N0", (0.5, 2.0)), ("theta", (0.0, 0.1))), integrator=SMALL)
    base.update(kw)
    return SweepSpec(**base)


# -- presets ----------------------------------------------------------------------

def test_fig1_axes():
    spec = figure_preset("fig1")
    assert spec.variant is ModelVariant.TRAD_NORM
    assert spec.axes == (("N0", (30.0, 10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.03)),)
    assert spec.base_params.theta == 0.0
    assert spec.analyses == ("growth_curve",)


def test_fig6_axes():
    (name, values), = figure_preset("fig6").axes
    assert name == "mu0"
    expected = [math.sqrt(2) * 1e6, 2e6, math.sqrt(10) * 1e6, math.sqrt(20) * 1e6,
                math.sqrt(50) * 1e6, 1e7, math.sqrt(2) * 1e7, 2e7, math.sqrt(10) * 1e7]
    np.testing.assert_allclose(values, expected, rtol=1e-15)
    assert values == FIG6_MU0


def test_fig6_fig7_parameters():
    for name, delta in (("fig6", 0.0), ("fig7", 4e5)):
        spec = figure_preset(name)
        assert isinstance(spec.base_params, PhysicalParams)
        assert spec.base_params.N_total == 1e12 and spec.base_params.delta == delta
        assert spec.analyses == ("pulse_metrics",)


def test_fig8_parameters():
    p = figure_preset("fig8").base_params
    assert (p.Gamma_tilde, p.theta, p.I0, p.N0) == (0.1, 0.4, 0.0, 0.05)
    assert set(figure_preset("fig8").analyses) == {"pulse_train", "outflow"}


@pytest.mark.parametrize("name, N0, theta", [
    ("fig2", 0.05, 0.0), ("fig3", 0.01, 0.0), ("fig4", 0.05, 0.045), ("fig5", 0.01, 0.04),
])
def test_pair_presets(name, N0, theta):
    spec = figure_preset(name)
    assert spec.axes == (("variant", ("trad-norm", "sep-norm")),)
    assert spec.base_params.N0 == N0
    assert spec.base_params.theta == pytest.approx(theta, rel=0.01)
    a, b = (resolve(spec, p) for p in spec.grid())
    assert a.params == b.params
    assert a.initial_state.values[1] == b.initial_state.values[1]


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        figure_preset("fig9")


def test_every_preset_builds():
    for name in PRESETS:
        assert figure_preset(name).seed_label == name


# -- spec validation and serialization --------------------------------------------

def test_axis_must_name_a_parameter():
    with pytest.raises(SchemaError):
        small_spec(axes=(("mu0", (1.0,)),))
    with pytest.raises(SchemaError):
        small_spec(axes=(("N0", ()),))
    with pytest.raises(SchemaError):
        small_spec(analyses=("spectrum",))


def test_spec_round_trip():
    for spec in [small_spec(), *(figure_preset(n) for n in PRESETS)]:
        again = SweepSpec.from_dict(spec.to_dict())
        assert again == spec
        assert again.hash() == spec.hash()


def test_spec_from_dict_is_strict():
    d = small_spec().to_dict()
    d["extra"] = 1
    with pytest.raises(SchemaError):
        SweepSpec.from_dict(d)
    d = small_spec().to_dict()
    d["integrator"]["order"] = 5
    with pytest.raises(SchemaError):
        SweepSpec.from_dict(d)


def test_grid_order_is_lexicographic():
    points = list(small_spec().grid())
    assert points == [{"N0": 0.5, "theta": 0.0}, {"N0": 0.5, "theta": 0.1},
                      {"N0": 2.0, "theta": 0.0}, {"N0": 2.0, "theta": 0.1}]


def test_unified_clock_scales_window():
    spec = figure_preset("fig6")
    sc = resolve(spec, {"mu0": 1e7})
    assert sc.time_factor == pytest.approx(0.1)
    assert sc.integrator.t_end == pytest.approx(200.0)


# -- execution --------------------------------------------------------------------

def test_grid_cap_checked_before_integration(monkeypatch):
    calls = []
    monkeypatch.setattr(sweep_mod, "integrate", lambda *a: calls.append(a))
    with pytest.raises(GridTooLarge):
        run_sweep(small_spec(grid_cap=3))
    assert calls == []


def test_records_carry_full_context():
    spec = small_spec(analyses=("conservation",))
    recs = run_sweep(spec)
    assert [r.index for r in recs] == [0, 1, 2, 3]
    assert len({r.spec_hash for r in recs}) == 1
    for r in recs:
        assert r.status == "ok"
        assert r.params["kind"] == "normalized" and "spontaneous_source_factor" in r.params
        assert set(r.initial_state) == {"M1", "N1"}
        assert r.integrator["t_end"] == 2.0
        assert r.step_stats["accepted"] > 0
    assert "drift" in recs[0].analyses["conservation"]
    assert recs[1].analyses["conservation"]["error"] == "NoConservedQuantity"


def test_empty_analyses_keep_trajectories_only():
    recs = run_sweep(small_spec())
    assert all(r.analyses == {} and r.trajectory is not None for r in recs)


def test_parallel_matches_sequential():
    spec = small_spec(analyses=("conservation", "growth_curve"))
    a, b = run_sweep(spec, jobs=1), run_sweep(spec, jobs=4)
    for x, y in zip(a, b):
        assert x.to_dict() == y.to_dict()
        assert x.trajectory.states.tobytes() == y.trajectory.states.tobytes()


def test_integration_failure_is_captured_per_record():
    spec = small_spec(integrator=IntegratorConfig(t_end=2.0, max_steps=3),
                      axes=(("N0", (0.5,)),))
    rec, = run_sweep(spec)
    assert rec.status == "MaxStepsExceeded"
    assert rec.trajectory is None and rec.error


def test_fig6_sweep_yields_nine_metrics():
    recs = run_sweep(figure_preset("fig6"), jobs=2)
    assert len(recs) == 9
    metrics = [r.analyses["pulse_metrics"] for r in recs]
    assert all("fwhm" in m for m in metrics)
    peaks = [m["peak_value"] for m in metrics]
    assert all(b > a for a, b in zip(peaks, peaks[1:]))
    assert peaks[-1] == pytest.approx(0.5, rel=0.1)


def test_fig1_plateau_ordering():
    recs = run_sweep(figure_preset("fig1"), jobs=4)
    by_n0 = {r.axis_values["N0"]: r.analyses["growth_curve"]["plateau"] for r in recs}
    assert by_n0[0.03] > by_n0[30.0]
    assert [r.axis_values["N0"] for r in recs] == list(FIG1_N0)


# -- model comparison -------------------------------------------------------------

def test_identical_records_do_not_diverge():
    rec, = run_sweep(small_spec(axes=(("N0", (0.5,)),)))
    ov = compare_models((rec, rec))
    assert ov.divergence == 0.0


def test_pair_columns():
    recs = run_sweep(figure_preset("fig2"))
    ov = compare_models((recs[0], recs[1]))
    assert list(ov.columns) == ["T", "M1", "N1", "M", "N_inc", "N_c"]
    assert ov.divergence == pytest.approx(np.max(np.abs(ov.columns["M1"] - ov.columns["M"])))
    assert compare_models((recs[1], recs[0])).divergence == ov.divergence


def test_mismatched_grids():
    a, = run_sweep(small_spec(axes=(("N0", (0.5,)),)))
    b, = run_sweep(small_spec(axes=(("N0", (0.5,)),),
                              integrator=IntegratorConfig(t_end=2.0, sample_interval=0.2)))
    with pytest.raises(MismatchedGrids):
        compare_models((a, b))


@pytest.mark.xfail(strict=True, reason="lossy pair diverges slightly more than the lossless "
                                       "pair (0.352 vs 0.349); see the decisions ledger")
def test_losses_reduce_model_divergence():
    lossless = run_sweep(figure_preset("fig2"))
    lossy = run_sweep(figure_preset("fig4"))
    assert compare_models(tuple(lossy)).divergence < compare_models(tuple(lossless)).divergence


@given(n0=st.lists(st.floats(0.05, 5.0), min_size=1, max_size=3, unique=True))
def test_one_record_per_grid_point(n0):
    spec = small_spec(axes=(("N0", tuple(n0)),))
    recs = run_sweep(spec, jobs=2)
    assert [r.axis_values["N0"] for r in recs] == n0
