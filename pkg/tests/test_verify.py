import json

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from finsler_torus.geodesics import ConstantChart, sphere_cap_chart
from finsler_torus.norms import EuclideanNorm
from finsler_torus.verify import (
    CheckEntry,
    SabotagedMetric,
    VerificationReport,
    calibration_suite,
    conjugate_scan,
    gradient_flow,
    isometry_suite,
    no_conjugate_points_suite,
)


def jacobi_first_zero(K):
    """First positive zero of J'' + K J = 0, J(0) = 0, J'(0) = 1, by event location."""
    event = lambda t, y: y[0]  # noqa: E731
    event.terminal = True
    event.direction = -1
    sol = solve_ivp(lambda t, y: [y[1], -K * y[0]], (1e-3, 20.0), [1e-3, 1.0], events=event, rtol=1e-12, atol=1e-14)
    return float(sol.t_events[0][0])


@pytest.mark.parametrize("K", [0.5, 1.0, 2.0])
def test_sphere_control_matches_jacobi_oracle(K):
    chart = sphere_cap_chart(K)
    t = conjugate_scan(chart, (1 / np.sqrt(K), 0.0), np.pi / 2, 5.0)
    assert t is not None
    assert abs(t - jacobi_first_zero(K)) < 1e-2
    assert jacobi_first_zero(K) == pytest.approx(np.pi / np.sqrt(K), abs=1e-8)


def test_conjugate_time_converges_in_dtheta():
    chart = sphere_cap_chart(1.0)
    a = conjugate_scan(chart, (1.0, 0.0), np.pi / 2, 5.0, dtheta=1e-4)
    b = conjugate_scan(chart, (1.0, 0.0), np.pi / 2, 5.0, dtheta=1e-5)
    assert abs(a - b) <= 1e-3


def test_flat_has_no_conjugate_points():
    chart = ConstantChart(EuclideanNorm())
    assert conjugate_scan(chart, (0.0, 0.0), 0.3, 40.0, dt=0.1) is None
    times = conjugate_scan(chart, np.zeros((3, 2)), np.array([0.0, 1.0, 2.0]), 10.0, dt=0.1)
    assert np.all(np.isnan(times))


def test_suite_on_flat_torus_passes(small_flat):
    entry = no_conjugate_points_suite(small_flat.metric, n_geodesics=20, T=4 * small_flat.metric.l, seed=3, dt=0.05)
    assert entry.passed and entry.max_violation == 0


def test_sabotaged_control_is_flagged(small_flat):
    bad = SabotagedMetric(small_flat.metric)
    t = conjugate_scan(bad, (-4.0, 0.3), 0.0, 20.0, dt=0.02)
    assert t is not None and 0.01 < t < 20.0
    entry = no_conjugate_points_suite(bad, n_geodesics=8, T=36.0, seed=1, dt=0.02)
    assert not entry.passed and entry.witnesses and entry.details["first_time"] > 0


def test_gradient_flow_flat_is_exactly_calibrated(small_flat):
    F = small_flat.F_tilde
    t, xs = gradient_flow(F, np.array([0.4, 2.5]), np.array([[0.1, 0.0], [-0.2, 0.3]]), 0.25)
    vals = np.stack([F.value(np.array([0.4, 2.5]), x) for x in xs])
    assert np.max(np.abs(vals - vals[0] - t[:, None])) < 1e-10


def test_calibration_suite_flat(small_flat):
    cal, mini = calibration_suite(small_flat.F_tilde, small_flat.metric, n_curves=10, seed=2)
    assert cal.max_violation < 1e-10 and mini.max_violation < 1e-8
    assert cal.passed and mini.passed


def test_isometry_suite_identity(small_flat):
    entries = {e.name: e for e in isometry_suite(small_flat.metric, small_flat.chart, n_samples=50)}
    assert set(entries) == {"isometry_inner", "flat_outside", "periodicity", "identity"}
    assert all(e.passed for e in entries.values())
    assert entries["periodicity"].max_violation == 0.0


def test_seeded_suites_are_reproducible(small_conformal):
    m = small_conformal.metric
    a = no_conjugate_points_suite(m, n_geodesics=4, T=5.0, seed=7, dt=0.05)
    b = no_conjugate_points_suite(m, n_geodesics=4, T=5.0, seed=7, dt=0.05)
    assert a == b
    c1 = calibration_suite(m.field, m, n_curves=5, seed=7)
    c2 = calibration_suite(m.field, m, n_curves=5, seed=7)
    assert c1 == c2


def test_report_formats():
    rep = VerificationReport()
    rep.add(CheckEntry("a", np.float64(1e-5), 1e-3, True, [{"x": np.array([0.5, 1.0])}]))
    rep.add(CheckEntry("b", 2.0, 0.0, False))
    assert not rep.passed
    assert rep["a"].passed and rep["b"].max_violation == 2.0
    with pytest.raises(KeyError):
        rep["c"]
    data = json.loads(rep.to_json())
    assert data["passed"] is False and data["entries"][0]["witnesses"][0]["x"] == [0.5, 1.0]
    text = rep.to_text().splitlines()
    assert text[-1] == "overall: FAIL" and "PASS" in text[1] and "FAIL" in text[2]
