import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbgtouch.calib import WindowSet
from fbgtouch.evaluation import (ConsistencyReport, LocalizationReport, SensorCharacterization,
                                 cross_sensor_consistency, evaluate_localization, measure_degradation,
                                 measure_response_times, measure_sensitivity, step_response_times)
from fbgtouch.fbgsim import SimConfig
from fbgtouch.formats import canonical_json
from fbgtouch.geometry import NormalizedPoint, SensorGeometry, chord_distance_mm


def labeled_set(rng, n=50):
    contact = rng.uniform(size=n) < 0.6
    pos = np.where(contact[:, None], rng.uniform(size=(n, 2)), np.nan)
    return WindowSet(np.zeros((n + 4, 8)), np.arange(4, n + 4), 4, contact, pos, np.arange(n))


def test_perfect_predictor(rng, geom):
    ws = labeled_set(rng)
    rep = evaluate_localization(lambda X: (np.nan_to_num(ws.positions), ws.contact.astype(float)), ws, geom)
    assert rep.mean_error_mm == 0.0 and rep.contact_accuracy == 1.0
    assert rep.confusion["fp"] == rep.confusion["fn"] == 0


def test_fixed_point_predictor(rng, geom):
    ws = labeled_set(rng)
    fixed = np.array([0.3, 0.6])
    rep = evaluate_localization(lambda X: (np.tile(fixed, (len(X), 1)), np.ones(len(X))), ws, geom)
    truth = ws.positions[ws.contact]
    expect = np.mean([math.dist((10 * math.cos(2 * math.pi * fixed[0]), 10 * math.sin(2 * math.pi * fixed[0]), 20 * fixed[1]),
                                (10 * math.cos(2 * math.pi * u), 10 * math.sin(2 * math.pi * u), 20 * v))
                      for u, v in truth])
    assert rep.mean_error_mm == pytest.approx(expect, rel=1e-12)
    assert rep.contact_accuracy == pytest.approx(ws.contact.mean())


def test_empty_test_set(geom):
    ws = WindowSet(np.zeros((4, 8)), np.zeros(0, int), 4, np.zeros(0, bool), np.zeros((0, 2)), np.zeros(0, int))
    with pytest.raises(ValueError):
        evaluate_localization(lambda X: None, ws, geom)


def test_sensitivity_at_grating(layout, geom):
    f = measure_sensitivity(layout, SimConfig(), geom, layout.positions[0])
    assert f == pytest.approx(0.028, abs=0.001)
    assert f == pytest.approx(3 * 0.001 / 0.1071, abs=1e-4)


def test_sensitivity_one_sigma_away(layout, geom):
    g = layout.positions[0]
    f = measure_sensitivity(layout, SimConfig(), geom, NormalizedPoint(g.u, g.v + 4.0 / 20.0))
    assert f == pytest.approx(0.028 / math.exp(-0.5), abs=0.002)
    assert f == pytest.approx(3 * 0.001 / 0.1071 / math.exp(-0.5), abs=1e-4)


def test_sensitivity_noise_free(layout, geom):
    assert measure_sensitivity(layout, SimConfig(noise_sigma_nm=0.0), geom, layout.positions[0]) == 0.0


@given(st.floats(1e-5, 0.01), st.floats(1e-5, 0.01))
def test_sensitivity_monotone_in_noise(s1, s2):
    from fbgtouch.fbgsim import default_layout
    lay, g = default_layout(), SensorGeometry()
    lo, hi = sorted((s1, s2))
    a = measure_sensitivity(lay, SimConfig(noise_sigma_nm=lo), g, lay.positions[2])
    b = measure_sensitivity(lay, SimConfig(noise_sigma_nm=hi), g, lay.positions[2])
    assert a <= b


def test_response_times(layout, geom):
    rise, fall = step_response_times(layout, SimConfig(), geom)
    assert rise == pytest.approx(87.0, abs=1.0)
    assert fall == pytest.approx(92.0, abs=1.0)


def test_response_times_halve_with_tau(layout, geom):
    cfg = SimConfig()
    fast = replace(cfg, rise_tau_ms=cfg.rise_tau_ms / 2, fall_tau_ms=cfg.fall_tau_ms / 2)
    rise, fall = step_response_times(layout, fast, geom)
    assert rise == pytest.approx(43.5, abs=0.5)
    assert fall == pytest.approx(46.0, abs=0.5)


def test_response_requires_steady_state():
    x = np.concatenate([np.zeros(10), 1 - np.exp(-np.arange(20) / 30.0), np.zeros(20)])
    with pytest.raises(ValueError):
        measure_response_times(x, 10, 30, sample_rate_hz=2000)


def test_response_on_array():
    on, off = 10, 400
    x = np.zeros(800)
    x[on:off] = 1 - 0.5 ** np.arange(1, off - on + 1)
    x[off:] = x[off - 1] * 0.5 ** np.arange(1, 401)
    rise, fall = measure_response_times(x, on, off, sample_rate_hz=1000)
    # 1 - 0.5**n >= 0.9 first at n = 4 (index 3); 0.5**n <= 0.1 first at n = 4 (index 3)
    assert rise == 3.0 and fall == 3.0


def test_degradation_zero_cycles_noise_free(layout, geom):
    d = measure_degradation(layout, SimConfig(noise_sigma_nm=0.0), geom, layout.positions[0], 0)
    assert d == 0.0


def test_degradation_zero_cycles_with_noise(layout, geom):
    assert abs(measure_degradation(layout, SimConfig(), geom, layout.positions[0], 0)) < 0.005


def test_degradation_targets(layout, geom):
    d = measure_degradation(layout, SimConfig(), geom, layout.positions[0], 1760)
    assert d == pytest.approx(0.0374, abs=0.005)
    d = measure_degradation(layout, SimConfig.digit_profile(), geom, layout.positions[0], 100)
    assert d == pytest.approx(0.14, abs=0.01)


def _report(err):
    return LocalizationReport(err, err, [err], 0.97, {"tp": 1, "fp": 0, "tn": 1, "fn": 0})


def test_consistency_identical_runs(layout):
    rep = cross_sensor_consistency(layout, [4, 4, 4], lambda s: _report(5.0))
    assert rep.spread_mm == 0.0


def test_consistency_spread_and_table(layout):
    rep = cross_sensor_consistency(layout, [1, 2, 3], lambda s: _report({1: 5.3, 2: 5.8, 3: 5.36}[s]))
    assert rep.spread_mm == pytest.approx(0.5)
    lines = rep.table().splitlines()
    assert "Sensor 1" in lines[0] and "Sensor 3" in lines[0]
    assert lines[1].startswith("Accuracy (mm)") and "5.80" in lines[1]
    with pytest.raises(ValueError):
        cross_sensor_consistency(layout, [1], lambda s: _report(1.0))


def test_reports_roundtrip_through_json():
    import json
    loc = _report(4.25)
    assert LocalizationReport.from_record(json.loads(canonical_json(loc.to_record()))) == loc
    ch = SensorCharacterization(0.0280, 86.5, 91.5, 0.0374)
    assert SensorCharacterization.from_record(json.loads(canonical_json(ch.to_record()))) == ch
    con = ConsistencyReport([1, 2], [5.1, 5.4], [0.97, 0.98])
    back = json.loads(canonical_json(con.to_record()))
    assert back["spread_mm"] == con.spread_mm and back["mean_errors_mm"] == con.mean_errors_mm
