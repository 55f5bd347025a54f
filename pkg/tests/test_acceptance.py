"""Acceptance criteria 1-9; each test prints one PASS/FAIL line."""

import json
import time

import numpy as np
import pytest

from conftest import SMALL, record_criterion
from finsler_torus import PipelineConfig, run_pipeline
from finsler_torus._numerics import TWO_PI, XorShift64Star, unit
from finsler_torus.cli import main
from finsler_torus.envelope import check_enveloping, recover_distance
from finsler_torus.geodesics import ConformalChart, ConstantChart, sphere_cap_chart
from finsler_torus.norms import (
    Covector,
    EuclideanNorm,
    RandersNorm,
    check_quadratic_convexity,
    dual_norm,
    fundamental_tensor,
    quartic_norm,
)
from finsler_torus.verify import SabotagedMetric, conjugate_scan, no_conjugate_points_suite, verify_all


@pytest.fixture(scope="module")
def conformal_run(conformal_chart):
    t0 = time.perf_counter()
    res = run_pipeline(conformal_chart, PipelineConfig())
    build = time.perf_counter() - t0
    t1 = time.perf_counter()
    report = verify_all(res.metric, res.chart, seed=0)
    return res, report, build, time.perf_counter() - t1


def _disc(rng, n, radius):
    rho = radius * np.sqrt(rng.random(n))
    return rho[:, None] * unit(TWO_PI * rng.random(n))


def test_criterion_1_identity_pipeline():
    details, ok = [], True
    for name, norm in [("euclidean", EuclideanNorm()), ("randers", RandersNorm(np.eye(2), [0.3, 0.0]))]:
        t0 = time.perf_counter()
        res = run_pipeline(ConstantChart(norm), PipelineConfig())
        report = verify_all(res.metric, res.chart, seed=0)
        elapsed = time.perf_counter() - t0
        rng = np.random.default_rng(1)
        x = np.concatenate([rng.uniform(-res.cfg.l, res.cfg.l, (500, 2)), _disc(rng, 500, 2.4 * res.cfg.eps)])
        v = unit(TWO_PI * rng.random(1000))
        err = float(np.max(np.abs(res.metric.norm(x, v) - norm(v)) / norm(v)))
        passed = err <= 1e-10 and report.passed and report["identity"].passed and elapsed < 60
        ok &= passed
        details.append(f"{name}: max|phi~-phi0|/phi0={err:.1e} verify={'PASS' if report.passed else 'FAIL'} {elapsed:.0f}s")
    record_criterion(1, ok, "; ".join(details))
    assert ok


def test_criterion_2_locality(conformal_run, conformal_chart):
    res, _, build, _ = conformal_run
    rng = XorShift64Star(2)
    eps, r, l = res.cfg.eps, res.cfg.r, res.cfg.l
    rho = eps * np.sqrt(rng.random(200))
    x = rho[:, None] * unit(TWO_PI * rng.random(200))
    v = unit(TWO_PI * rng.random(200))
    ref = res.chart.norm(x, v)
    inner = float(np.max(np.abs(res.metric.norm(x, v) - ref) / ref))
    pts = []
    while len(pts) < 200:
        cand = rng.uniform(-l, l, (200, 2))
        pts.extend(cand[np.hypot(cand[:, 0], cand[:, 1]) >= r])
    y = np.array(pts[:200])
    w = unit(TWO_PI * rng.random(200))
    phi0 = res.metric.reference
    outer = float(np.max(np.abs(res.metric.norm(y, w) - phi0(w)) / phi0(w)))
    ok = inner <= 1e-3 and outer <= 1e-10 and build < 300
    record_criterion(2, ok, f"inner rel {inner:.1e} (<=1e-3), outside D_r {outer:.1e} (<=1e-10), build {build:.0f}s (<300s)")
    assert ok


def _jacobi_first_zero(K):
    from scipy.integrate import solve_ivp

    event = lambda t, y: y[0]  # noqa: E731
    event.terminal, event.direction = True, -1
    sol = solve_ivp(lambda t, y: [y[1], -K * y[0]], (1e-3, 20.0), [1e-3, 1.0], events=event, rtol=1e-12, atol=1e-14)
    return float(sol.t_events[0][0])


def test_criterion_3_no_conjugate_points(conformal_run):
    res, report, _, _ = conformal_run
    entry = report["no_conjugate_points"]
    clean = entry.passed and entry.details["n_geodesics"] == 100 and entry.details["length"] == 4 * res.cfg.l
    bad = no_conjugate_points_suite(SabotagedMetric(res.metric), n_geodesics=100, seed=0)
    flagged = (not bad.passed) and bool(bad.witnesses)
    errs = []
    for K in (0.5, 1.0, 2.0):
        t = conjugate_scan(sphere_cap_chart(K), (1 / np.sqrt(K), 0.0), np.pi / 2, 5.0)
        errs.append(np.inf if t is None else abs(t - _jacobi_first_zero(K)))
    sphere = max(errs) <= 1e-2
    ok = clean and flagged and sphere
    record_criterion(
        3,
        ok,
        f"pipeline: {int(entry.max_violation)}/100 conjugate; sabotaged: {int(bad.max_violation)}/100 flagged "
        f"(first t={bad.details['first_time']}); sphere K=0.5,1,2 errors {', '.join(f'{e:.1e}' for e in errs)}",
    )
    assert ok


def test_criterion_4_enveloping(conformal_run):
    res, _, _, _ = conformal_run
    rep = check_enveloping(res.F_tilde, res.chart, chart_radius=res.cfg.eps, tol_dl=1e-3)
    ok = rep.distance_like_violation <= 1e-3 and rep.winding_violation == 0 and rep.min_turning > 0
    record_criterion(
        4,
        ok,
        f"distance-like {rep.distance_like_violation:.1e} (<=1e-3), winding violations {rep.winding_violation}, "
        f"min turning {rep.min_turning:.3g} on {rep.n_points} grid points",
    )
    assert ok


def test_criterion_5_calibration(conformal_run):
    _, report, _, _ = conformal_run
    cal, mini = report["calibration"], report["minimality"]
    ok = cal.details["n_curves"] == 50 and cal.max_violation <= 1e-3 and mini.max_violation <= 2e-3
    record_criterion(5, ok, f"calibration {cal.max_violation:.1e} (<=1e-3), minimality {mini.max_violation:.1e} (<=2e-3)")
    assert ok


def test_criterion_6_metric_axioms(conformal_run):
    res, _, _, _ = conformal_run
    F = res.F_tilde
    rng = XorShift64Star(6)
    p = _disc(rng, 1500, 3 * res.cfg.eps).reshape(3, 500, 2)
    x, y, z = p
    dxy, dyz, dxz = recover_distance(F, x, y), recover_distance(F, y, z), recover_distance(F, x, z)
    dxx = recover_distance(F, x, x)
    triangle = float(np.max(dxz - dxy - dyz))
    ok = np.all(dxy > 0) and np.all(dxx == 0) and triangle <= 1e-6
    record_criterion(
        6, ok, f"min d(x,y)={dxy.min():.2e} > 0, max d(x,x)={np.max(np.abs(dxx)):.0e}, max triangle excess {triangle:.1e} (<=1e-6)"
    )
    assert ok


def test_criterion_7_symmetric_variant():
    res = run_pipeline(ConformalChart(EuclideanNorm(), "0.1*x + 0.05*x*y"), PipelineConfig(), symmetric=True)
    m = res.metric
    rng = XorShift64Star(7)
    x = _disc(rng, 200, 3 * res.cfg.eps)
    y = _disc(rng, 200, 3 * res.cfg.eps)
    v = unit(TWO_PI * rng.random(200))
    dn = float(np.max(np.abs(m.norm(x, v) - m.norm(x, -v))))
    dd = float(np.max(np.abs(m.distance(x, y) - m.distance(y, x))))
    ok = dn <= 1e-6 and dd <= 1e-6
    record_criterion(7, ok, f"|phi~(v)-phi~(-v)| {dn:.1e}, |d~(x,y)-d~(y,x)| {dd:.1e} (<=1e-6)")
    assert ok


def test_criterion_8_norms_suite():
    randers = RandersNorm(np.eye(2), [0.3, 0.0])
    psi = np.linspace(0, TWO_PI, 1_000_000, endpoint=False)
    u = unit(psi)
    brute = np.max((u / randers(u)[:, None])[:, 1])
    dual_err = abs(dual_norm(randers, Covector([0.0, 1.0])) - brute)
    quartic = check_quadratic_convexity(quartic_norm(), 64)
    at_axis = min(abs(np.sin(quartic.worst_direction)), abs(np.cos(quartic.worst_direction))) < 1e-12

    def L(w):
        return 0.5 * randers(w) ** 2

    v, h = np.array([0.0, 1.0]), 1e-4
    e = np.eye(2) * h
    fd = np.array([[(L(v + e[i] + e[j]) - L(v + e[i] - e[j]) - L(v - e[i] + e[j]) + L(v - e[i] - e[j])) / (4 * h * h) for j in range(2)] for i in range(2)])
    tensor_err = float(np.max(np.abs(fundamental_tensor(randers, v) - fd)))
    ok = dual_err <= 1e-5 and not quartic.passed and at_axis and tensor_err <= 1e-5
    record_criterion(
        8,
        ok,
        f"dual vs dense sampling {dual_err:.1e}; quartic min eigenvalue {quartic.min_eigenvalue:.1e} at "
        f"{quartic.worst_direction:.3f} rad ({'FAIL' if not quartic.passed else 'PASS'} as expected); tensor vs FD {tensor_err:.1e}",
    )
    assert ok


def test_criterion_9_reproducibility(tmp_path):
    spec = tmp_path / "patch.json"
    spec.write_text(json.dumps({"norm": {"kind": "euclidean"}, "lambda": "0.1*x"}))
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        flags = ["--n-theta", str(SMALL["n_theta"]), "--n-x", str(SMALL["n_x"])]
        assert main(["--quiet", "--out-dir", str(out), "build", str(spec), *flags]) == 0
        code = main(["--quiet", "--out-dir", str(out), "verify", str(out / "torus.json"), "--seed", "5"])
        names = ["torus.json", "torus_envelope.json", "torus_report.json", "torus_report.txt"]
        outputs.append(([(out / n).read_bytes() for n in names], code))
    same = outputs[0][0] == outputs[1][0] and outputs[0][1] == outputs[1][1]
    record_criterion(9, same, f"artifact, envelope table and reports byte-identical across runs: {same} (verify exit {outputs[0][1]})")
    assert same
