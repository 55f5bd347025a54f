"""Enveloping functions: construction, verification and metric recovery.

An enveloping function is a family ``F(theta, x)`` of distance-like functions,
one per boundary parameter ``theta``, whose differentials at every point sweep
the unit co-sphere once. The metric is recovered from it by

    d_F(x, y) = sup_theta F(theta, y) - F(theta, x)
    phi_F(x, v) = sup_theta d_x F_theta (v)

:class:`EnvelopeField` stores ``F`` as an exact linear reference part (the flat
field of a constant norm) plus a tabulated correction on a square grid.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline, RectBivariateSpline
from scipy.spatial import ConvexHull

from ._numerics import TWO_PI, PeriodicSpline, cross, golden_max, rot90, unit, wrap_angle
from .config import PipelineConfig
from .errors import ConfigurationError, InvalidArgument, InvalidState, NumericalFailure
from .geodesics import (
    FinslerChart,
    GeodesicPath,
    check_simple,
    distance,
    distances,
    frozen_norm,
    integrate,
)
from .norms import MinkowskiNorm

TOL_THETA = 1e-10


def reference_covectors(norm: MinkowskiNorm, theta):
    """Unit co-sphere covectors that vanish on direction ``theta`` and are positive on its left."""
    n = rot90(unit(theta))
    return n / norm.dual(n)[..., None]


class EnvelopeField:
    """``F(theta, x) = a0(theta) . x + correction(theta, x)``.

    ``a0(theta)`` is :func:`reference_covectors` of ``reference``; the
    correction lives on an ``n_x`` by ``n_x`` grid over ``[-R, R]^2`` (zero
    outside) and is bicubic in ``x``, periodic cubic in ``theta``.
    """

    def __init__(self, reference: MinkowskiNorm, n_theta: int, axis=None, correction=None, label: str = "F"):
        if n_theta % 2:
            raise InvalidArgument("n_theta must be even")
        self.reference = reference
        self.n_theta = n_theta
        self.theta = np.arange(n_theta) * (TWO_PI / n_theta)
        self.label = label
        self.ref_covectors = reference_covectors(reference, self.theta)
        if reference.symmetric:
            # theta + pi gives the negated covector; make it exact in floating point
            self.ref_covectors[n_theta // 2 :] = -self.ref_covectors[: n_theta // 2]
        self.axis = None if axis is None else np.asarray(axis, dtype=float)
        self.correction = None
        if correction is not None:
            correction = np.asarray(correction, dtype=float)
            if correction.shape != (n_theta, self.axis.size, self.axis.size):
                raise InvalidArgument(f"correction shape {correction.shape} does not match the grids")
            if not np.all(np.isfinite(correction)):
                raise InvalidArgument("non-finite correction table")
            self.correction = correction
            splines = [RectBivariateSpline(self.axis, self.axis, c, kx=3, ky=3, s=0) for c in correction]
            self._grid_grad = np.stack(
                [np.stack([sp(self.axis, self.axis, dx=1), sp(self.axis, self.axis, dy=1)], axis=-1) for sp in splines]
            )
            # every slice shares the knots, so keep one coefficient tensor
            self._knots = splines[0].get_knots()
            shape = (self._knots[0].size - 4, self._knots[1].size - 4)
            self._coef = np.stack([sp.get_coeffs().reshape(shape) for sp in splines])
            self._basis = [BSpline(t, np.eye(t.size - 4), 3) for t in self._knots]

    # --- grid access -----------------------------------------------------
    @property
    def half_width(self) -> float:
        return 0.0 if self.axis is None else float(self.axis[-1])

    def grid_points(self):
        X, Y = np.meshgrid(self.axis, self.axis, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def grid_values(self):
        """``F`` on the (theta, x, y) grid."""
        pts = self.grid_points()
        out = np.einsum("kc,ijc->kij", self.ref_covectors, pts)
        return out if self.correction is None else out + self.correction

    def grid_covectors(self):
        """``d_x F_theta`` on the (theta, x, y) grid, shape (n_theta, n_x, n_x, 2)."""
        ref = np.broadcast_to(self.ref_covectors[:, None, None, :], (self.n_theta, self.axis.size, self.axis.size, 2))
        return ref if self.correction is None else ref + self._grid_grad

    # --- pointwise evaluation on the theta grid --------------------------
    def _inside(self, x):
        if self.correction is None:
            return np.zeros(x.shape[0], bool)
        R = self.half_width
        return (np.abs(x[:, 0]) <= R) & (np.abs(x[:, 1]) <= R)

    def correction_at(self, x, dx=0, dy=0):
        """Correction (or a partial derivative) at points ``x`` for every grid theta: (n, n_theta)."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        out = np.zeros((x.shape[0], self.n_theta))
        inside = self._inside(x)
        if inside.any():
            xi = x[inside]
            for start in range(0, xi.shape[0], 1024):
                out[np.flatnonzero(inside)[start : start + 1024]] = self._tensor_eval(xi[start : start + 1024], dx, dy)
        return out

    def _local_basis(self, axis, coords, nu):
        t = self._knots[axis]
        j = np.clip(np.searchsorted(t, coords, side="right") - 1, 3, t.size - 5)
        idx = j[:, None] - 3 + np.arange(4)
        return idx, np.take_along_axis(self._basis[axis](coords, nu=nu), idx, axis=1)

    def _tensor_eval(self, x, dx, dy):
        ix, bx = self._local_basis(0, x[:, 0], dx)
        iy, by = self._local_basis(1, x[:, 1], dy)
        c = self._coef[:, ix[:, :, None], iy[:, None, :]]
        return np.einsum("knab,na,nb->nk", c, bx, by)

    def values(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        return x @ self.ref_covectors.T + self.correction_at(x)

    def covectors(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        out = np.broadcast_to(self.ref_covectors, (x.shape[0], self.n_theta, 2)).copy()
        if self.correction is not None:
            out[..., 0] += self.correction_at(x, dx=1)
            out[..., 1] += self.correction_at(x, dy=1)
        return out

    # --- arbitrary theta ---------------------------------------------------
    def value(self, theta, x):
        """``F(theta_i, x_i)`` for paired arrays."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), x.shape[:1])
        out = np.einsum("nc,nc->n", reference_covectors(self.reference, theta), x)
        if self.correction is not None:
            sp = PeriodicSpline(self.correction_at(x).T)
            out = out + sp(theta, index=np.arange(x.shape[0]))
        return out

    def gradient(self, theta, x):
        """``d_x F_theta`` at paired ``(theta_i, x_i)``."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), x.shape[:1])
        out = reference_covectors(self.reference, theta)
        if self.correction is not None:
            corr = self.covectors(x) - self.ref_covectors[None]
            out = out + PeriodicSpline(np.moveaxis(corr, 1, 0))(theta, index=np.arange(x.shape[0]))
        return out

    def gradient_dtheta(self, theta, x, step=1e-6):
        """Theta-derivative of ``d_x F_theta`` (tangent of the co-sphere curve)."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), x.shape[:1])
        out = (reference_covectors(self.reference, theta + step) - reference_covectors(self.reference, theta - step)) / (2 * step)
        if self.correction is not None:
            corr = self.covectors(x) - self.ref_covectors[None]
            out = out + PeriodicSpline(np.moveaxis(corr, 1, 0))(theta, index=np.arange(x.shape[0]), derivative=1)
        return out

    def with_correction(self, correction, label=None):
        return EnvelopeField(self.reference, self.n_theta, self.axis, correction, label or self.label)


# ----------------------------------------------------------------------------
# sup over the boundary parameter


def _sup_theta(F: EnvelopeField, direction, corr):
    """``max_theta a0(theta) . direction + c(theta)`` with ``c`` given on the theta grid."""
    n = direction.shape[0]
    coarse = direction @ F.ref_covectors.T + corr
    k = np.argmax(coarse, axis=1)
    h = TWO_PI / F.n_theta
    idx = np.arange(n)
    spline = PeriodicSpline(corr.T) if np.any(corr) else None

    def objective(t):
        val = np.einsum("nc,nc->n", reference_covectors(F.reference, t), direction)
        if spline is not None:
            val = val + spline(t, index=idx)
        return val

    theta, val = golden_max(objective, F.theta[k] - h, F.theta[k] + h, tol=TOL_THETA)
    val = np.maximum(val, coarse[idx, k])
    return val, theta % TWO_PI


def support_function(curves, directions, newton_steps=6):
    """``max_k curves[i, k] . directions[m]`` refined along the periodic spline of each curve.

    ``curves`` has shape (n, K, 2), sampled at ``2 pi k / K``; returns (n, M).
    Much faster than :func:`recover_norm` for dense tables; accuracy is that of
    the cubic interpolation of the co-sphere curve.
    """
    curves = np.asarray(curves, dtype=float)
    directions = np.asarray(directions, dtype=float)
    n, K, _ = curves.shape
    M = directions.shape[0]
    h = TWO_PI / K
    coarse = np.einsum("nkc,mc->nmk", curves, directions)
    k = np.argmax(coarse, axis=2)
    spline = PeriodicSpline(np.moveaxis(curves, 1, 0))
    index = np.repeat(np.arange(n), M)
    u = np.tile(directions, (n, 1))
    theta0 = (k.ravel() * h).astype(float)
    theta = theta0.copy()
    for _ in range(newton_steps):
        d1 = np.sum(spline(theta, index=index, derivative=1) * u, axis=1)
        d2 = np.sum(spline(theta, index=index, derivative=2) * u, axis=1)
        step = np.where(d2 < 0, -d1 / np.where(d2 < 0, d2, -1.0), np.sign(d1) * h / 4)
        theta = np.clip(theta + np.clip(step, -h / 2, h / 2), theta0 - h, theta0 + h)
    val = np.sum(spline(theta, index=index) * u, axis=1).reshape(n, M)
    return np.maximum(val, np.max(coarse, axis=2))


def recover_distance(F: EnvelopeField, x, y):
    """``d_F(x, y) = sup_theta F(theta, y) - F(theta, x)`` (paired batches or single points)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape, y.shape)[:-1]
    xf = np.broadcast_to(x, shape + (2,)).reshape(-1, 2)
    yf = np.broadcast_to(y, shape + (2,)).reshape(-1, 2)
    corr = F.correction_at(yf) - F.correction_at(xf)
    val, _ = _sup_theta(F, yf - xf, corr)
    val = np.where(np.all(xf == yf, axis=1), 0.0, val)
    return val.reshape(shape) if shape else float(val[0])


def recover_norm(F: EnvelopeField, x, v, validate=False, return_theta=False):
    """``phi_F(x, v) = sup_theta d_x F_theta (v)``, the support function of the co-sphere image.

    With ``validate`` the co-sphere image at each ``x`` is first checked to be a
    convex curve of winding number one.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = np.broadcast_shapes(x.shape, v.shape)[:-1]
    xf = np.broadcast_to(x, shape + (2,)).reshape(-1, 2)
    vf = np.broadcast_to(v, shape + (2,)).reshape(-1, 2)
    cov = F.covectors(xf)
    if validate:
        ok, _, _ = _cosphere_shape(cov)
        if not ok.all():
            raise InvalidState("co-sphere image is not convex; the field is not enveloping here")
    corr = np.einsum("nkc,nc->nk", cov - F.ref_covectors[None], vf)
    val, theta = _sup_theta(F, vf, corr)
    val = val.reshape(shape) if shape else float(val[0])
    if return_theta:
        return val, theta.reshape(shape)
    return val


def recover_norm_limit(F: EnvelopeField, x, v, t=1e-3):
    """Difference quotient ``d_F(x, x + t v) / t`` (converges to :func:`recover_norm`)."""
    x = np.asarray(x, dtype=float)
    return recover_distance(F, x, x + t * np.asarray(v, dtype=float)) / t


def finsler_gradient(F: EnvelopeField, theta, x, chart: FinslerChart | None = None):
    """Unit vector ``v`` maximising ``d_x F_theta (v)``.

    With a chart the indicatrix is the chart's; otherwise it is that of the
    recovered norm, whose maximiser is normal to the co-sphere curve at ``theta``.
    """
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), x.shape[:1])
    if chart is not None:
        return chart.dual_direction(x, F.gradient(theta, x))
    step = 1e-6
    alpha = reference_covectors(F.reference, theta)
    dalpha = (reference_covectors(F.reference, theta + step) - reference_covectors(F.reference, theta - step)) / (2 * step)
    corr = None
    if F.correction is not None:
        corr = F.covectors(x) - F.ref_covectors[None]
        sp = PeriodicSpline(np.moveaxis(corr, 1, 0))
        idx = np.arange(x.shape[0])
        alpha = alpha + sp(theta, index=idx)
        dalpha = dalpha + sp(theta, index=idx, derivative=1)
    normal = rot90(dalpha)
    v = normal / np.einsum("nc,nc->n", alpha, normal)[:, None]
    support = np.zeros((x.shape[0], F.n_theta)) if corr is None else np.einsum("nkc,nc->nk", corr, v)
    phi, _ = _sup_theta(F, v, support)
    return v / phi[:, None]


@dataclass(frozen=True)
class RecoveredMetric:
    """Distance and norm encoded by an enveloping function."""

    source: EnvelopeField

    def distance(self, x, y):
        return recover_distance(self.source, x, y)

    def norm(self, x, v):
        return recover_norm(self.source, x, v)

    distance_fn = distance
    norm_fn = norm


# ----------------------------------------------------------------------------
# construction


def _sample_scale(chart, half):
    g = np.linspace(-half, half, 9)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    u = unit(np.linspace(0.0, TWO_PI, 33)[:-1])
    vals = chart.norm(pts[:, None, :], u[None, :, :])
    return float(vals.max())


def build_envelope(chart: FinslerChart, cfg: PipelineConfig, check=False, threads=1) -> EnvelopeField:
    """Signed distance to the geodesic fan through the origin, tabulated on the local square.

    For each theta, ``gamma_theta`` is the unit-speed geodesic through the origin
    with the flat fan's initial velocity. Left of it ``F = d(gamma, x)``, right of
    it ``F = -d(x, gamma)``. Both are evaluated by characteristics: the
    minimising geodesics meet ``gamma`` with a unit covector annihilating its
    tangent, so ``F`` equals the arclength ``t`` along the transversal geodesic
    leaving ``gamma(s)`` (t > 0) or arriving at it (t < 0). The map
    ``(s, t) -> x`` is tabulated by RK4 and inverted on the grid by Newton's
    method.

    The chart must already be normalised so the basepoint is the origin.
    """
    if check:
        rep = check_simple(chart, (0.0, 0.0), cfg.eps)
        if not rep.is_simple:
            raise ConfigurationError(f"disc of radius {cfg.eps} is not simple: {rep.reason}")
    phi0 = frozen_norm(chart, (0.0, 0.0))
    field = EnvelopeField(phi0, cfg.n_theta)
    half = cfg.half_width
    axis = np.linspace(-half, half, cfg.n_x)
    reach = 1.25 * np.sqrt(2.0) * half * _sample_scale(chart, half)
    n = cfg.envelope_steps
    h = reach / n
    theta = field.theta
    u = unit(theta)
    v0 = u / chart.norm(np.zeros(2), u)[:, None]
    origin = np.zeros_like(v0)
    xf, vf = integrate(chart, origin, v0, h, n)
    xb, vb = integrate(chart, origin, v0, -h, n)
    P = np.concatenate([xb[::-1], xf[1:]])  # (2n+1, n_theta, 2) indexed by s
    V = np.concatenate([vb[::-1], vf[1:]])
    if not np.all(chart.contains(P)):
        raise ConfigurationError("fan geodesic leaves the chart before spanning the tabulated square")
    normal = rot90(V)
    alpha = normal / chart.dual(P, normal)[..., None]
    w = chart.dual_direction(P, alpha)
    tf, _ = integrate(chart, P, w, h, n)
    tb, _ = integrate(chart, P, w, -h, n)
    sigma = np.concatenate([tb[::-1], tf[1:]])  # (2n+1 [t], 2n+1 [s], n_theta, 2)
    if not np.all(chart.contains(sigma)):
        raise ConfigurationError("transversal geodesic leaves the chart before spanning the tabulated square")
    grid = np.arange(-n, n + 1) * h
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    targets = np.stack([X.ravel(), Y.ravel()], axis=1)

    def invert(k):
        sx = RectBivariateSpline(grid, grid, sigma[:, :, k, 0].T, kx=3, ky=3, s=0)
        sy = RectBivariateSpline(grid, grid, sigma[:, :, k, 1].T, kx=3, ky=3, s=0)
        M = np.column_stack([V[n, k], w[n, k]])
        st = np.linalg.solve(M, targets.T).T
        s, t = st[:, 0], st[:, 1]
        for _ in range(30):
            s = np.clip(s, grid[0], grid[-1])
            t = np.clip(t, grid[0], grid[-1])
            rx = sx.ev(s, t) - targets[:, 0]
            ry = sy.ev(s, t) - targets[:, 1]
            if max(np.max(np.abs(rx)), np.max(np.abs(ry))) < 1e-13 * max(1.0, half):
                break
            a, b = sx.ev(s, t, dx=1), sx.ev(s, t, dy=1)
            c, d = sy.ev(s, t, dx=1), sy.ev(s, t, dy=1)
            det = a * d - b * c
            s = s - (d * rx - b * ry) / det
            t = t - (a * ry - c * rx) / det
        resid = max(np.max(np.abs(sx.ev(s, t) - targets[:, 0])), np.max(np.abs(sy.ev(s, t) - targets[:, 1])))
        inside = np.all(np.abs(st) < reach, axis=1)
        if resid > 1e-9 or np.any(np.abs(s) >= grid[-1]) or np.any(np.abs(t) >= grid[-1]) or not inside.all():
            raise NumericalFailure(f"characteristic inversion failed for theta index {k}", residual=float(resid))
        return t.reshape(X.shape)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            F = np.stack(list(pool.map(invert, range(cfg.n_theta))))
    else:
        F = np.stack([invert(k) for k in range(cfg.n_theta)])
    flat = np.einsum("kc,ijc->kij", field.ref_covectors, np.stack([X, Y], axis=-1))
    return EnvelopeField(phi0, cfg.n_theta, axis, F - flat, label="F_local")


def fan_geodesic(chart: FinslerChart, theta: float, T: float, dt: float = 1e-2) -> GeodesicPath:
    """Unit-speed geodesic through the origin with the fan's velocity at ``theta``, for ``t`` in [-T, T]."""
    u = unit(theta)
    v0 = u / chart.norm(np.zeros(2), u)
    n = max(1, int(np.ceil(T / dt)))
    h = T / n
    xf, vf = integrate(chart, np.zeros(2), v0, h, n)
    xb, vb = integrate(chart, np.zeros(2), v0, -h, n)
    t = np.arange(-n, n + 1) * h
    x = np.concatenate([xb[::-1], xf[1:]])
    v = np.concatenate([vb[::-1], vf[1:]])
    return GeodesicPath(t=t, x=x, v=v, metric_tag=getattr(chart, "tag", "chart"))


def signed_distance(chart: FinslerChart, path: GeodesicPath, x, n_scan=33, refinements=3) -> float:
    """Signed distance from ``x`` to a sampled geodesic by direct minimisation.

    Left of the curve the value is ``min_s d(gamma(s), x)``, right of it
    ``-min_s d(x, gamma(s))``; the side is the sign of the cross product of the
    tangent at the closest sample with the offset. Minimisation is a coarse scan
    followed by successive parabolic refinement, each point a boundary-value
    solve. Slow; meant for spot checks.
    """
    x = np.asarray(x, dtype=float)
    j = int(np.argmin(np.sum((path.x - x) ** 2, axis=1)))
    side = cross(path.v[j], x - path.x[j])
    if side == 0:
        return 0.0
    left = side > 0

    def dist(s):
        pts = path.at(np.atleast_1d(s))
        xs = np.broadcast_to(x, pts.shape)
        return distances(chart, pts, xs) if left else distances(chart, xs, pts)

    s = np.linspace(path.t.min(), path.t.max(), n_scan)
    d = dist(s)
    i = int(np.clip(np.argmin(d), 1, n_scan - 2))
    best_s, best_d = s[i], d[i]
    width = s[1] - s[0]
    for _ in range(refinements):
        trio = np.array([best_s - width, best_s, best_s + width])
        vals = dist(trio)
        denom = vals[0] - 2 * vals[1] + vals[2]
        shift = 0.5 * width * (vals[0] - vals[2]) / denom if denom > 0 else 0.0
        cand = best_s + np.clip(shift, -width, width)
        dc = float(dist(cand)[0])
        best_s, best_d = (cand, dc) if dc < vals.min() else (trio[int(np.argmin(vals))], float(vals.min()))
        width *= 0.1
    return float(best_d) if left else -float(best_d)


def busemann(chart: FinslerChart, ray: GeodesicPath, x, T: float) -> float:
    """Finite-horizon Busemann value ``T - d(x, ray(T))``."""
    if T > ray.t.max() + 1e-12:
        raise InvalidArgument("ray is not defined up to the requested horizon")
    return T - distance(chart, x, ray.at(T))


def busemann_gap(chart: FinslerChart, ray: GeodesicPath, x, T: float):
    """Values at horizons ``T`` and ``2 T`` and their gap (convergence diagnostic)."""
    b1 = busemann(chart, ray, x, T)
    b2 = busemann(chart, ray, x, 2 * T)
    return b1, b2, abs(b2 - b1)


# ----------------------------------------------------------------------------
# verification of the enveloping conditions


def _cosphere_shape(cov):
    """Winding number and discrete convexity of co-sphere curves ``cov`` (..., n_theta, 2)."""
    ang = np.arctan2(cov[..., 1], cov[..., 0])
    turns = np.sum(wrap_angle(np.roll(ang, -1, axis=-1) - ang), axis=-1) / TWO_PI
    winding = np.rint(turns).astype(int)
    edge = np.roll(cov, -1, axis=-2) - cov
    length = np.linalg.norm(edge, axis=-1)
    turning = cross(edge, np.roll(edge, -1, axis=-2)) / (length * np.roll(length, -1, axis=-1))
    min_turn = np.min(turning, axis=-1)
    min_edge = np.min(length, axis=-1) / np.mean(length, axis=-1)
    ok = (winding == 1) & (min_turn > 0) & (min_edge > 0)
    return ok, winding, np.minimum(min_turn, min_edge)


def _hull_gauge_defect(cov):
    """``max_k (1 - gauge(a_k))`` where gauge is that of the convex hull of the curve."""
    hull = ConvexHull(cov)
    normals, offsets = hull.equations[:, :2], hull.equations[:, 2]
    gauge = np.max((cov @ normals.T) / (-offsets), axis=1)
    return float(np.max(np.abs(1.0 - gauge)))


@dataclass
class EnvelopeReport:
    distance_like_violation: float
    winding_violation: int
    min_turning: float
    n_points: int
    tol_dl: float
    witness: tuple | None = None

    @property
    def condition_a(self) -> bool:
        return self.distance_like_violation <= self.tol_dl

    @property
    def condition_b(self) -> bool:
        return self.winding_violation == 0 and self.min_turning > 0

    @property
    def passed(self) -> bool:
        return self.condition_a and self.condition_b


def check_enveloping(
    F: EnvelopeField,
    chart: FinslerChart | None = None,
    chart_radius: float = np.inf,
    tol_dl: float = 1e-3,
    stride: int = 1,
) -> EnvelopeReport:
    """Evaluate both enveloping conditions on the tabulation grid.

    (a) ``|phi*(d_x F_theta) - 1|``: against ``chart`` at grid points within
        ``chart_radius``; elsewhere against the norm the field itself encodes,
        for which the defect is that of the hull gauge (zero exactly when every
        sample lies on the boundary of its convex hull).
    (b) for each ``x`` the curve ``theta -> d_x F_theta`` winds once around the
        origin, with non-vanishing steps and positive turning (convexity).
    """
    if F.axis is None:
        pts = np.zeros((1, 2))
        cov = F.ref_covectors[None]
    else:
        P = F.grid_points()[::stride, ::stride]
        pts = P.reshape(-1, 2)
        cov = np.moveaxis(F.grid_covectors()[:, ::stride, ::stride], 0, 2).reshape(-1, F.n_theta, 2)
    ok, winding, turning = _cosphere_shape(cov)
    defect = np.zeros(pts.shape[0])
    use_chart = np.zeros(pts.shape[0], bool)
    if chart is not None:
        use_chart = np.hypot(pts[:, 0], pts[:, 1]) <= chart_radius
        if use_chart.any():
            xs = np.broadcast_to(pts[use_chart][:, None, :], cov[use_chart].shape)
            defect[use_chart] = np.max(np.abs(chart.dual(xs, cov[use_chart]) - 1.0), axis=1)
    rest = ~use_chart
    if F.correction is None and rest.any():
        defect[rest] = np.max(np.abs(F.reference.dual(cov[rest]) - 1.0), axis=1)
    else:
        for i in np.flatnonzero(rest & ~ok):
            defect[i] = _hull_gauge_defect(cov[i])
    i = int(np.argmax(defect))
    j = int(np.argmin(turning))
    witness = tuple(pts[i]) if defect[i] > tol_dl else (tuple(pts[j]) if not ok.all() else None)
    return EnvelopeReport(
        distance_like_violation=float(defect.max()),
        winding_violation=int(np.max(np.abs(winding - 1))),
        min_turning=float(turning.min()),
        n_points=int(pts.shape[0]),
        tol_dl=tol_dl,
        witness=witness,
    )
