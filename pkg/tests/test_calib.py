import warnings

import numpy as np
import pytest

from fbgtouch.calib import (ContactEvent, ScanPlan, WindowSet, balance_windows, channel_range,
                            denormalize_signals, label_stream, make_windows, normalize_signals,
                            run_scan, split_dataset, split_events)
from fbgtouch.fbgsim import SimConfig, default_layout
from fbgtouch.geometry import NormalizedPoint, SensorGeometry, grid_to_surface, normalize

TINY = SensorGeometry(grid_cols=2, grid_rows=2, rotation_increment_rad=np.pi)


def events_at(*mids):
    return [ContactEvent(m, NormalizedPoint(0.1 * n, 0.5), 1.0) for n, m in enumerate(mids)]


@pytest.fixture(scope="module")
def default_scan():
    return run_scan(SensorGeometry(), default_layout(), SimConfig(), ScanPlan(), seed=0)


def test_default_scan_event_count(default_scan):
    stream, events = default_scan
    assert len(events) == 5 * 5 * 12 * 3 == 900
    assert ScanPlan().contact_count(SensorGeometry()) == 900
    mids = np.array([e.idx_mid for e in events])
    assert np.all(np.diff(mids) > 0) and mids[-1] < len(stream)


def test_default_scan_midpoints_are_dwell_centers(default_scan):
    stream, events = default_scan
    plan = ScanPlan()
    # contact c spans [gap + c * period, gap + c * period + dwell)
    n0 = round(plan.gap_s * 2000)
    half = round(plan.dwell_s * 2000) // 2
    assert events[0].idx_mid == n0 + half - 1
    period = round((plan.dwell_s + plan.gap_s) * 2000)
    assert events[7].idx_mid - events[6].idx_mid == period


def test_zero_jitter_truth_is_grid(quiet):
    plan = ScanPlan(attempts_per_point=1, jitter_sigma_mm=0.0, dwell_s=0.05, gap_s=0.05)
    _, events = run_scan(TINY, default_layout(), quiet, plan, seed=0)
    expect = []
    for k in range(TINY.rotations):
        for i in range(TINY.grid_cols):
            for j in range(TINY.grid_rows):
                expect.append(normalize(TINY, grid_to_surface(TINY, i, j, k)))
    got = sorted((round(e.truth.u, 12), round(e.truth.v, 12)) for e in events)
    want = sorted((round(p.u, 12), round(p.v, 12)) for p in expect)
    assert np.allclose(got, want, atol=1e-12)
    assert not any(e.clamped for e in events)


def test_scan_determinism():
    plan = ScanPlan(attempts_per_point=2, dwell_s=0.05, gap_s=0.05)
    a = run_scan(TINY, default_layout(), SimConfig(), plan, seed=5)
    b = run_scan(TINY, default_layout(), SimConfig(), plan, seed=5)
    c = run_scan(TINY, default_layout(), SimConfig(), plan, seed=6)
    assert a[1] == b[1]
    assert np.array_equal(a[0].wavelengths_nm, b[0].wavelengths_nm)
    assert a[1] != c[1]


def test_jitter_off_band_is_clamped():
    plan = ScanPlan(attempts_per_point=5, jitter_sigma_mm=4.0, dwell_s=0.02, gap_s=0.02)
    _, events = run_scan(TINY, default_layout(), SimConfig(), plan, seed=1)
    clamped = [e for e in events if e.clamped]
    assert clamped
    assert all(e.truth.v in (0.0, 1.0) for e in clamped)
    assert all(0.0 <= e.truth.v <= 1.0 for e in events)


def test_label_single_event():
    lab = label_stream(3000, events_at(1000), 400)
    assert np.array_equal(np.flatnonzero(lab.contact), np.arange(600, 1401))


def test_label_no_events():
    lab = label_stream(100, [], 10)
    assert not lab.contact.any()


def test_label_overlap_nearest_midpoint():
    lab = label_stream(3000, events_at(1000, 1500), 400)
    assert np.array_equal(np.flatnonzero(lab.contact), np.arange(600, 1901))
    assert np.all(lab.event[600:1250] == 0)
    assert lab.event[1250] == 0  # equidistant: earlier event
    assert np.all(lab.event[1251:1901] == 1)


def test_label_coverage_property(rng):
    mids = np.sort(rng.choice(np.arange(50, 9950), size=20, replace=False))
    lab = label_stream(10000, events_at(*mids), 137)
    dist = np.min(np.abs(np.arange(10000)[:, None] - mids[None]), axis=1)
    assert np.array_equal(lab.contact, dist <= 137)


def test_label_requires_sorted_events():
    with pytest.raises(ValueError):
        label_stream(100, events_at(50, 10), 5)


def test_make_windows_count_and_edges():
    data = np.arange(128 * 2, dtype=float).reshape(128, 2)
    lab = label_stream(128, [], 5)
    ws = make_windows(data, lab, 64, 64)
    assert len(ws) == 2
    assert np.array_equal(ws.signals([1])[0], data[64:128])
    assert not ws.contact.any()
    assert ws[0].position is None


def test_window_label_is_right_edge():
    ev = events_at(1000)
    lab = label_stream(3000, ev, 400)
    ws = make_windows(np.zeros((3000, 8)), lab, 64, 1, ev)
    n = np.flatnonzero(ws.ends == 1001)[0]  # covers [937, 1001), right edge is idx_mid
    assert ws.contact[n] and ws[n].position == ev[0].truth
    assert ws.contact[ws.ends == 601].all() and not ws.contact[ws.ends == 600].any()
    assert ws.contact[ws.ends == 1401].all() and not ws.contact[ws.ends == 1402].any()


def test_make_windows_too_short():
    with pytest.raises(ValueError):
        make_windows(np.zeros((10, 2)), label_stream(10, [], 3), 64, 8)


def test_normalize_examples():
    base = np.array([1530.0, 1540.0])
    scale = np.array([0.2, 0.1])
    assert np.allclose(normalize_signals(base, base, scale), 0.0)
    assert np.allclose(normalize_signals(base + scale, base, scale), 1.0)
    x = base + np.array([[0.05, -0.02]])
    assert np.allclose(denormalize_signals(normalize_signals(x, base, scale), base, scale), x)


def test_normalize_constant_channel_warns():
    data = np.column_stack([np.full(50, 1530.0), np.linspace(1540, 1541, 50)])
    scale = channel_range(data)
    with pytest.warns(UserWarning):
        out = normalize_signals(data, np.array([1530.0, 1540.0]), scale)
    assert np.all(out[:, 0] == 0.0)
    assert np.all(np.isfinite(out))


def test_normalize_windowset_roundtrip(rng):
    data = 1530 + rng.normal(size=(200, 3))
    ws = make_windows(data, label_stream(200, [], 4), 16, 4)
    base, scale = data.mean(axis=0), channel_range(data)
    norm = normalize_signals(ws, base, scale)
    assert np.allclose(denormalize_signals(norm.signals(), base, scale), ws.signals())


def test_split_counts_and_determinism():
    t = split_events(900, 0.2, seed=4)
    assert len(t) == 180 and len(np.unique(t)) == 180
    assert np.array_equal(t, split_events(900, 0.2, seed=4))
    with pytest.raises(ValueError):
        split_events(1, 0.2, 0)
    with pytest.raises(ValueError):
        split_events(10, 1.0, 0)


def test_split_no_leakage():
    mids = np.arange(50) * 1000 + 500
    ev = events_at(*mids)
    lab = label_stream(50_000, ev, 400)
    ws = make_windows(np.zeros((50_000, 2)), lab, 64, 8, ev)
    train, test = split_dataset(ws, ev, 0.2, seed=2)
    assert len(train) + len(test) == len(ws)
    assert not set(train.ends) & set(test.ends)
    assert not set(train.event) & set(test.event)
    assert len(set(test.event)) == 10


def test_balance_keeps_positives(rng):
    contact = rng.uniform(size=500) < 0.3
    ws = WindowSet(np.zeros((600, 1)), np.arange(100, 600), 10, contact,
                   np.zeros((500, 2)), np.zeros(500, dtype=int))
    b = balance_windows(ws, 1.0, seed=0)
    assert b.contact.sum() == contact.sum()
    assert (~b.contact).sum() == contact.sum()
    assert np.all(np.diff(b.ends) > 0)


def test_plan_validation():
    with pytest.raises(ValueError):
        ScanPlan(attempts_per_point=0)
    with pytest.raises(ValueError):
        ScanPlan(dwell_s=0.0)
