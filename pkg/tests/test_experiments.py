import dataclasses

import numpy as np
import pytest

from openlz.dissipator import NoiseConfig
from openlz.errors import InvalidParameterError, PropagationError
from openlz.experiments import (
    CSV_HEADER,
    ResultRecord,
    SweepSpec,
    default_gamma_grid,
    initial_state,
    read_csv,
    run_sweep,
    transfer_efficiency,
    write_csv,
)
from openlz.integrator import IntegratorConfig
from openlz.model import ModelParams
from openlz.spin import build_spin

# regression values frozen from the first validated runs at rel_tol=1e-9
EFF_HALF_GAMMA0 = 0.9992123146709678
EFF_HALF_JX_G01 = 0.3193789527273185
EFF_ONE_JZ_G1_T10 = 0.2215252461841701


def test_default_gamma_grid():
    g = default_gamma_grid()
    assert len(g) == 25
    assert g[0] == pytest.approx(1e-4, rel=1e-12)
    assert g[-1] == pytest.approx(1.0, rel=1e-12)
    assert g[6] == pytest.approx(1e-3, rel=1e-12)
    assert g[18] == pytest.approx(1e-1, rel=1e-12)
    assert np.all(np.diff(np.log(g)) > 0)
    with pytest.raises(InvalidParameterError):
        default_gamma_grid(0)
    with pytest.raises(InvalidParameterError):
        default_gamma_grid(5, lo=-1.0)


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        SweepSpec(j_list=())
    with pytest.raises(InvalidParameterError):
        SweepSpec(j_list=(0.7,))
    with pytest.raises(InvalidParameterError):
        SweepSpec(gamma_grid=())
    with pytest.raises(InvalidParameterError):
        SweepSpec(gamma_grid=(-0.1,))
    with pytest.raises(InvalidParameterError):
        SweepSpec(channels=())
    with pytest.raises(InvalidParameterError):
        SweepSpec(channels=("Jy",))
    with pytest.raises(InvalidParameterError):
        SweepSpec(temperatures=())
    with pytest.raises(InvalidParameterError):
        SweepSpec(workers=0)
    s = build_spin(1.0)
    # a matrix channel pins the dimension, so mixed j lists are rejected
    with pytest.raises(InvalidParameterError):
        SweepSpec(j_list=(0.5, 1.0), channels=(s.jy,))
    ok = SweepSpec(j_list=(1.0,), channels=(s.jy,), gamma_grid=(0.1,))
    assert ok.n_points() == 2


def test_initial_state():
    rho = initial_state(1.5)
    assert rho.shape == (4, 4)
    assert rho[3, 3] == 1.0
    assert np.trace(rho) == 1.0


def test_gamma_zero_efficiency_regression():
    p = ModelParams(j=0.5)
    cfg = IntegratorConfig(rel_tol=1e-9)
    r = transfer_efficiency(0.5, NoiseConfig("Jx", 0.0, 0.001), p, cfg)
    assert r.efficiency == pytest.approx(EFF_HALF_GAMMA0, abs=1e-7)
    assert r.channel == "Jx"
    assert r.gamma == 0.0
    assert not r.failed
    assert r.trace_drift < 1e-10
    assert r.min_eigenvalue > -1e-8
    assert r.wall_time > 0.0


def test_gamma_zero_temperature_invariance():
    # temperature only enters through the rates, which all carry gamma
    p = ModelParams(j=0.5)
    cfg = IntegratorConfig(rel_tol=1e-9)
    cold = transfer_efficiency(0.5, NoiseConfig("Jx", 0.0, 0.001), p, cfg)
    hot = transfer_efficiency(0.5, NoiseConfig("Jx", 0.0, 10.0), p, cfg)
    assert cold.efficiency == hot.efficiency


def test_weak_dissipation_degrades():
    p = ModelParams(j=0.5)
    cfg = IntegratorConfig(rel_tol=1e-9)
    r = transfer_efficiency(0.5, NoiseConfig("Jx", 1e-2, 0.001), p, cfg)
    assert r.efficiency < EFF_HALF_GAMMA0
    assert r.efficiency == pytest.approx(EFF_HALF_JX_G01, abs=1e-6)


def test_hot_dephasing_regression():
    p = ModelParams(j=1.0)
    cfg = IntegratorConfig(rel_tol=1e-9)
    r = transfer_efficiency(1.0, NoiseConfig("Jz", 1e-1, 10.0), p, cfg)
    assert r.efficiency == pytest.approx(EFF_ONE_JZ_G1_T10, abs=1e-6)
    assert r.temperature == 10.0


def test_transfer_efficiency_replaces_model_j():
    # the model carries sweep-wide parameters; j comes from the argument.
    # gamma=0 keeps the state exactly pure, so the eigenvalue floor needs
    # a tighter local tolerance than the dissipative default.
    p = ModelParams(j=0.5)
    r = transfer_efficiency(1.0, NoiseConfig("Jz", 0.0, 1.0), p,
                            IntegratorConfig(rel_tol=1e-11))
    assert r.j == 1.0
    assert 0.99 < r.efficiency <= 1.0


def test_single_point_sweep_matches_direct_call():
    spec = SweepSpec(j_list=(0.5,), gamma_grid=(1e-2,), channels=("Jx",),
                     temperatures=(0.001,))
    recs = run_sweep(spec)
    assert len(recs) == 1
    direct = transfer_efficiency(
        0.5, NoiseConfig("Jx", 1e-2, 0.001), spec.model, spec.integrator)
    assert recs[0].efficiency == direct.efficiency


def test_sweep_ordering_and_cardinality():
    spec = SweepSpec(j_list=(0.5, 1.0), gamma_grid=(1e-3, 1e-1),
                     channels=("Jz", "Jx"), temperatures=(0.001, 10.0))
    recs = run_sweep(spec)
    assert len(recs) == spec.n_points() == 16
    keys = [(r.j, r.channel, r.temperature, r.gamma) for r in recs]
    want = [(j, c, t, g)
            for j in (0.5, 1.0)
            for c in ("Jz", "Jx")
            for t in (0.001, 10.0)
            for g in (1e-3, 1e-1)]
    assert keys == want
    for r in recs:
        assert not r.failed
        assert 0.0 <= r.efficiency <= 1.0


def test_sweep_determinism_modulo_wall_time():
    spec = SweepSpec(j_list=(0.5,), gamma_grid=(1e-2, 1e-1),
                     channels=("Jz",), temperatures=(10.0,))
    a = run_sweep(spec)
    b = run_sweep(spec)
    strip = lambda r: dataclasses.replace(r, wall_time=0.0)
    assert [strip(r) for r in a] == [strip(r) for r in b]


def test_sweep_monotone_smoke():
    # small-scale version of the figure-level orderings
    spec = SweepSpec(j_list=(0.5, 1.0), gamma_grid=(1e-3, 1e-2, 1e-1),
                     channels=("Jx",), temperatures=(0.001,))
    recs = run_sweep(spec)
    eff = {(r.j, r.gamma): r.efficiency for r in recs}
    for j in (0.5, 1.0):
        assert eff[(j, 1e-3)] >= eff[(j, 1e-2)] - 1e-4
        assert eff[(j, 1e-2)] >= eff[(j, 1e-1)] - 1e-4
    for g in (1e-3, 1e-2, 1e-1):
        assert eff[(0.5, g)] >= eff[(1.0, g)] - 1e-4


def test_failed_point_recorded_not_raised(tmp_path):
    # starve the step budget so every point fails; the sweep must flag and
    # continue rather than abort
    spec = SweepSpec(j_list=(0.5,), gamma_grid=(1e-2,), channels=("Jz",),
                     temperatures=(0.001,),
                     integrator=IntegratorConfig(max_steps=10))
    out = tmp_path / "failed.csv"
    recs = run_sweep(spec, out)
    assert len(recs) == 1
    assert recs[0].failed
    assert np.isnan(recs[0].efficiency)
    back = read_csv(out)
    assert back[0].failed
    assert np.isnan(back[0].efficiency)


def test_transfer_failure_raises_with_report():
    p = ModelParams(j=0.5)
    n = NoiseConfig("Jz", 0.0, 0.0)
    with pytest.raises(PropagationError) as exc:
        transfer_efficiency(0.5, n, p,
                            IntegratorConfig(method="rk4_fixed", dt=0.5))
    assert exc.value.report is not None
    assert exc.value.report.failed


def test_csv_round_trip(tmp_path):
    spec = SweepSpec(j_list=(0.5,), gamma_grid=(0.0, 1e-2),
                     channels=("Jx",), temperatures=(0.001,))
    out = tmp_path / "sweep.csv"
    recs = run_sweep(spec, out)
    text = out.read_text().splitlines()
    assert text[0] == ",".join(CSV_HEADER)
    assert len(text) == 3
    back = read_csv(out)
    strip = lambda r: dataclasses.replace(r, hermiticity_drift=0.0)
    assert [strip(r) for r in recs] == back


def test_read_csv_rejects_wrong_header(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(InvalidParameterError):
        read_csv(bad)


def test_custom_channel_tagged(tmp_path):
    s = build_spin(0.5)
    spec = SweepSpec(j_list=(0.5,), gamma_grid=(1e-2,), channels=(s.jy,),
                     temperatures=(1.0,))
    out = tmp_path / "cust.csv"
    recs = run_sweep(spec, out)
    assert recs[0].channel == "custom"
    assert read_csv(out)[0].channel == "custom"
