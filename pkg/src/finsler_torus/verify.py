"""Certification of a glued torus metric and positive controls.

Conjugate points are detected with the Jacobi field of the angular variation,
``J(t) = d gamma_theta(t) / d theta`` by central differences of three shots;
in two dimensions ``t`` is conjugate to 0 exactly when ``det[gamma'(t), J(t)]``
vanishes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ._numerics import TWO_PI, XorShift64Star, cross, unit
from .envelope import EnvelopeField, finsler_gradient, recover_distance
from .errors import NumericalFailure
from .geodesics import ConformalChart, ConstantChart, FinslerChart, TranslatedChart, distances, rk4_step, unit_velocity
from .glue import BumpProfile, TorusMetric

DTHETA = 1e-4
T_MIN = 1e-2
SCAN_DT = 1e-2


@dataclass
class CheckEntry:
    name: str
    max_violation: float
    threshold: float
    passed: bool
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    entries: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, entry: CheckEntry) -> CheckEntry:
        self.entries.append(entry)
        return entry

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "entries": [asdict(e) for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(_plain(self.to_dict()), indent=1, sort_keys=True)

    def to_text(self) -> str:
        rows = [f"{'check':<22} {'max violation':>14} {'threshold':>10}  result"]
        for e in self.entries:
            rows.append(f"{e.name:<22} {e.max_violation:>14.3e} {e.threshold:>10.1e}  {'PASS' if e.passed else 'FAIL'}")
        rows.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(rows)


def _plain(obj):
    """Convert numpy scalars/arrays to JSON-ready Python values with round-trip floats."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _as_chart(metric) -> FinslerChart:
    return metric.chart() if isinstance(metric, TorusMetric) else metric


# ----------------------------------------------------------------------------
# conjugate points


def conjugate_scan(metric, x0, theta0, T, dt=SCAN_DT, dtheta=DTHETA, t_min=T_MIN):
    """First conjugate time of the geodesics from ``x0`` at angle ``theta0``.

    Three unit-speed geodesics at angles ``theta0`` and ``theta0 +- dtheta`` are
    integrated with RK4; the first sign change of ``det[gamma', J]`` after
    ``t_min`` is located by linear interpolation between grid times.

    Args:
        metric: a :class:`TorusMetric` or any chart.
        x0: start point(s), shape (2,) or (n, 2).
        theta0: start angle(s), scalar or (n,).
        T: scan length.

    Returns:
        For a single geodesic the conjugate time or None; for a batch an array
        with NaN where no conjugate point was found.
    """
    chart = _as_chart(metric)
    single = np.ndim(theta0) == 0
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    n = theta0.size
    x0 = np.broadcast_to(x0, (n, 2))
    X = np.concatenate([x0, x0, x0])
    angles = np.concatenate([theta0, theta0 + dtheta, theta0 - dtheta])
    V = unit_velocity(chart, X, angles)
    steps = int(np.ceil(T / dt))
    h = T / steps
    found = np.full(n, np.nan)
    prev = np.full(n, np.nan)
    for i in range(steps):
        X, V = rk4_step(chart, X, V, h)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(V))):
            raise NumericalFailure(f"geodesic integration diverged at t={(i + 1) * h:.3g}")
        J = (X[n : 2 * n] - X[2 * n :]) / (2 * dtheta)
        det = cross(V[:n], J)
        t = (i + 1) * h
        if t > t_min:
            flip = np.isnan(found) & (prev > 0) & (det <= 0)
            if flip.any():
                found[flip] = t - h + h * prev[flip] / (prev[flip] - det[flip])
        prev = det
    if single:
        return None if np.isnan(found[0]) else float(found[0])
    return found


def _disc(rng, n, radius):
    rho = radius * np.sqrt(rng.random(n))
    phi = TWO_PI * rng.random(n)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=1)


def sample_starts(metric: TorusMetric, n, rng, biased=0.5):
    """Start points: a fraction in the perturbed disc D_2eps, the rest uniform on the fundamental square."""
    k = int(round(biased * n))
    inner = _disc(rng, k, 2 * metric.eps)
    outer = rng.uniform(-metric.l, metric.l, (n - k, 2))
    return np.concatenate([inner, outer])


def no_conjugate_points_suite(metric: TorusMetric, n_geodesics=100, T=None, seed=0, dt=SCAN_DT) -> CheckEntry:
    """Scan seeded random geodesics of length ``T`` (default ``4 l``) for conjugate points."""
    rng = XorShift64Star(seed)
    T = 4 * metric.l if T is None else T
    x0 = sample_starts(metric, n_geodesics, rng)
    theta = TWO_PI * rng.random(n_geodesics)
    times = conjugate_scan(metric, x0, theta, T, dt=dt)
    bad = np.flatnonzero(~np.isnan(times))
    witnesses = [{"x0": x0[i].tolist(), "theta0": float(theta[i]), "conjugate_time": float(times[i])} for i in bad[:10]]
    return CheckEntry(
        name="no_conjugate_points",
        max_violation=float(bad.size),
        threshold=0.0,
        passed=bad.size == 0,
        witnesses=witnesses,
        details={"n_geodesics": n_geodesics, "length": T, "dt": dt, "first_time": float(np.nanmin(times)) if bad.size else None},
    )


class SabotagedMetric(TorusMetric):
    """Positive control: ``exp(amplitude * b(x))`` times the torus norm, with ``b`` a radial bump.

    The factor is injected straight into the norm field, bypassing the
    enveloping construction.
    """

    def __init__(self, metric: TorusMetric, amplitude=0.8, radius=None):
        super().__init__(metric.field, metric.eps, metric.r, metric.l, metric.symmetric)
        self.inner = metric
        self.amplitude = amplitude
        self.bump = BumpProfile(0.0, metric.l / 2 if radius is None else radius)

    def lam(self, x):
        return self.amplitude * self.bump.at(self.wrap(x))

    def norm(self, x, v):
        return np.exp(self.lam(x)) * self.inner.norm(x, v)

    def chart(self, n_psi: int = 128):
        if self._chart is None:
            self._chart = ConformalChart(self.inner.chart(n_psi), self.lam)
        return self._chart


# ----------------------------------------------------------------------------
# calibration


def gradient_flow(F: EnvelopeField, theta, x0, length, n_steps=32):
    """RK4 integral curves of the unit gradient of ``F_theta``; returns (t, x) with x of shape (n+1, m, 2)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    h = length / n_steps
    out = [x.copy()]
    for _ in range(n_steps):
        k1 = finsler_gradient(F, theta, x)
        k2 = finsler_gradient(F, theta, x + 0.5 * h * k1)
        k3 = finsler_gradient(F, theta, x + 0.5 * h * k2)
        k4 = finsler_gradient(F, theta, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NumericalFailure("gradient flow diverged")
        out.append(x.copy())
    return np.arange(n_steps + 1) * h, np.stack(out)


def calibration_suite(F: EnvelopeField, metric: TorusMetric, n_curves=50, seed=0, length=None, n_steps=32):
    """Calibration identity and minimality along gradient curves of ``F_theta``.

    Returns two entries. ``calibration``: ``|F(gamma(t)) - F(gamma(0)) - t|``.
    ``minimality``: ``|d(gamma(0), gamma(t)) - t|`` at the end point and the
    midpoint, with ``d`` from the boundary value solver on the recovered metric.
    """
    rng = XorShift64Star(seed)
    length = metric.eps if length is None else length
    x0 = sample_starts(metric, n_curves, rng)
    theta = TWO_PI * rng.random(n_curves)
    t, xs = gradient_flow(F, theta, x0, length, n_steps)
    vals = np.stack([F.value(theta, xi) for xi in xs])
    calib = np.abs(vals - vals[0] - t[:, None])
    i_cal = np.unravel_index(np.argmax(calib), calib.shape)
    chart = metric.chart()
    mid = n_steps // 2
    starts = np.concatenate([xs[0], xs[0]])
    ends = np.concatenate([xs[mid], xs[-1]])
    expect = np.concatenate([np.full(n_curves, t[mid]), np.full(n_curves, t[-1])])
    d = distances(chart, starts, ends)
    mini = np.abs(d - expect)
    j = int(np.argmax(mini))
    d_sup = recover_distance(F, starts, ends)
    calibration = CheckEntry(
        name="calibration",
        max_violation=float(calib.max()),
        threshold=1e-3,
        passed=bool(calib.max() <= 1e-3),
        witnesses=[{"x0": xs[0, i_cal[1]].tolist(), "theta": float(theta[i_cal[1]]), "t": float(t[i_cal[0]])}],
        details={"n_curves": n_curves, "length": length},
    )
    minimality = CheckEntry(
        name="minimality",
        max_violation=float(mini.max()),
        threshold=2e-3,
        passed=bool(mini.max() <= 2e-3),
        witnesses=[{"x": starts[j].tolist(), "y": ends[j].tolist(), "distance": float(d[j]), "expected": float(expect[j])}],
        details={"sup_formula_gap": float(np.max(np.abs(d_sup - expect)))},
    )
    return calibration, minimality


# ----------------------------------------------------------------------------
# isometry


def _is_constant(chart):
    while isinstance(chart, TranslatedChart):
        chart = chart.chart
    return isinstance(chart, ConstantChart)


def _directions(rng, n):
    return unit(TWO_PI * rng.random(n))


def isometry_suite(metric: TorusMetric, chart: FinslerChart, n_samples=200, seed=0) -> list:
    """Agreement with ``phi`` on D_eps, with ``phi0`` outside D_r, periodicity and (when relevant) symmetry.

    ``chart`` is the input metric normalised so the basepoint is the origin.
    """
    rng = XorShift64Star(seed)
    phi0 = metric.reference
    entries = []
    x = _disc(rng, n_samples, metric.eps)
    v = _directions(rng, n_samples)
    ref = chart.norm(x, v)
    err = np.abs(metric.norm(x, v) - ref) / ref
    i = int(np.argmax(err))
    entries.append(CheckEntry("isometry_inner", float(err.max()), 1e-3, bool(err.max() <= 1e-3), [{"x": x[i].tolist(), "v": v[i].tolist()}]))

    pts = []
    while len(pts) < n_samples:
        cand = rng.uniform(-metric.l, metric.l, (n_samples, 2))
        pts.extend(cand[np.hypot(cand[:, 0], cand[:, 1]) >= metric.r])
    x = np.array(pts[:n_samples]) + 2 * metric.l * np.floor(rng.uniform(-3, 3, (n_samples, 2)))
    v = _directions(rng, n_samples)
    err = np.abs(metric.norm(x, v) - phi0(v)) / phi0(v)
    entries.append(CheckEntry("flat_outside", float(err.max()), 1e-10, bool(err.max() <= 1e-10)))

    # dyadic samples, so that the lattice shifts are exact in floating point
    x = np.round(_disc(rng, n_samples, 3 * metric.eps) * 2.0**30) / 2.0**30
    v = _directions(rng, n_samples)
    base = metric.norm(x, v)
    shifted = np.concatenate([metric.norm(x + [2 * metric.l, 0.0], v), metric.norm(x + [0.0, -2 * metric.l], v)])
    err = np.max(np.abs(shifted - np.tile(base, 2)))
    entries.append(CheckEntry("periodicity", float(err), 0.0, bool(err == 0.0)))

    if _is_constant(chart):
        x = rng.uniform(-metric.l, metric.l, (n_samples, 2))
        x[: n_samples // 2] = _disc(rng, n_samples // 2, 2 * metric.eps)
        v = _directions(rng, n_samples)
        err = np.abs(metric.norm(x, v) - phi0(v)) / phi0(v)
        entries.append(CheckEntry("identity", float(err.max()), 1e-10, bool(err.max() <= 1e-10)))

    if metric.symmetric:
        entries.append(symmetry_check(metric, n_samples, rng))
    return entries


def symmetry_check(metric: TorusMetric, n_samples=200, rng=None, seed=0) -> CheckEntry:
    """``|phi~(x, v) - phi~(x, -v)|`` and ``|d~(x, y) - d~(y, x)|`` on seeded samples near the patch."""
    rng = XorShift64Star(seed) if rng is None else rng
    x = _disc(rng, n_samples, 3 * metric.eps)
    y = _disc(rng, n_samples, 3 * metric.eps)
    v = _directions(rng, n_samples)
    dn = np.abs(metric.norm(x, v) - metric.norm(x, -v))
    dd = np.abs(metric.distance(x, y) - metric.distance(y, x))
    worst = float(max(dn.max(), dd.max()))
    return CheckEntry("symmetry", worst, 1e-6, worst <= 1e-6, details={"norm": float(dn.max()), "distance": float(dd.max())})


def verify_all(metric: TorusMetric, chart: FinslerChart, n_geodesics=100, T=None, seed=0, n_curves=50, dt=SCAN_DT) -> VerificationReport:
    report = VerificationReport()
    report.add(no_conjugate_points_suite(metric, n_geodesics, T, seed, dt=dt))
    for e in calibration_suite(metric.field, metric, n_curves, seed):
        report.add(e)
    for e in isometry_suite(metric, chart, seed=seed):
        report.add(e)
    return report
