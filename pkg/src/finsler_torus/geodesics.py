"""Finsler metric fields on a planar chart and their geodesics.

Geodesics are integral curves of the Euler-Lagrange spray of the energy
``L = phi^2 / 2``; they are integrated with fixed-step RK4 and are unit speed
when started unit speed. All chart methods broadcast over leading axes.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ._numerics import TWO_PI, cross, golden_max, unit, wrap_angle
from .errors import InvalidArgument, NumericalFailure, SingularityError
from .norms import MinkowskiNorm, RandersNorm, TabulatedNorm, fd_gradient, fd_hessian, norm_from_spec

TOL_SPEED = 1e-6
DEFAULT_DT = 1e-3


def _solve2(g, r, det=None):
    """Batched solve of 2x2 systems ``g a = r``."""
    if det is None:
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    a0 = (g[..., 1, 1] * r[..., 0] - g[..., 0, 1] * r[..., 1]) / det
    a1 = (g[..., 0, 0] * r[..., 1] - g[..., 1, 0] * r[..., 0]) / det
    return np.stack([a0, a1], axis=-1)


class FinslerChart:
    """Base class: a field ``x -> phi(x, .)`` of Minkowski norms on a disc.

    Subclasses must implement :meth:`norm`; the other hooks fall back on finite
    differences (velocity derivatives) and a numerical dual.
    """

    radius: float = np.inf
    smoothness_step: float = 1e-4
    tag: str = "chart"

    def norm(self, x, v):
        raise NotImplementedError

    def legendre(self, x, v):
        return self.norm(x, v)[..., None] * fd_gradient(lambda w: self.norm(x, w), v)

    def tensor(self, x, v):
        return fd_hessian(lambda w: 0.5 * self.norm(x, w) ** 2, v)

    def dual(self, x, alpha):
        return chart_scan_dual(self, x, alpha)[0]

    def dual_direction(self, x, alpha):
        """Unit vector at ``x`` maximising ``alpha``."""
        _, psi = chart_scan_dual(self, x, alpha)
        return unit_velocity(self, np.broadcast_to(x, np.shape(psi) + (2,)), psi)

    def norm_at(self, x) -> MinkowskiNorm:
        x = np.asarray(x, dtype=float)
        return MinkowskiNorm(lambda v: self.norm(np.broadcast_to(x, v.shape), v))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.hypot(x[..., 0], x[..., 1]) <= self.radius

    @property
    def symmetric(self) -> bool:
        return False

    def spray(self, x, v):
        """Geodesic acceleration ``g^{-1} (dL/dx - (d/dx dL/dv) v)``."""
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        h = self.smoothness_step
        dldx = []
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            dldx.append((self.norm(x + e, v) ** 2 - self.norm(x - e, v) ** 2) / (4.0 * h))
        dldx = np.stack(dldx, axis=-1)
        speed = np.hypot(v[..., 0], v[..., 1])
        if np.any(speed == 0):
            raise SingularityError("spray is undefined for zero velocity")
        step = (h / speed)[..., None] * v
        mixed = (self.legendre(x + step, v) - self.legendre(x - step, v)) * (speed / (2.0 * h))[..., None]
        g = self.tensor(x, v)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        if np.any(det <= 0):
            raise SingularityError("degenerate fundamental tensor in spray")
        return _solve2(g, dldx - mixed, det)


class ConstantChart(FinslerChart):
    """The same norm at every point."""

    tag = "constant"

    def __init__(self, base: MinkowskiNorm, radius=np.inf):
        self.base = base
        self.radius = radius

    def norm(self, x, v):
        v = np.asarray(v, dtype=float)
        return np.broadcast_to(self.base(v), np.broadcast_shapes(np.shape(x)[:-1], v.shape[:-1]))

    def legendre(self, x, v):
        return np.broadcast_to(self.base.legendre(v), np.broadcast_shapes(np.shape(x), np.shape(v)))

    def tensor(self, x, v):
        t = self.base.tensor(v)
        return np.broadcast_to(t, np.broadcast_shapes(np.shape(x)[:-1], np.shape(v)[:-1]) + (2, 2))

    def dual(self, x, alpha):
        return np.broadcast_to(self.base.dual(alpha), np.broadcast_shapes(np.shape(x)[:-1], np.shape(alpha)[:-1]))

    def dual_direction(self, x, alpha):
        return np.broadcast_to(self.base.dual_direction(alpha), np.broadcast_shapes(np.shape(x), np.shape(alpha)))

    def spray(self, x, v):
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        return np.zeros_like(v)

    def norm_at(self, x):
        return self.base

    @property
    def symmetric(self):
        return self.base.symmetric


class ConformalChart(FinslerChart):
    """``phi(x, v) = exp(lam(x)) * base(x, v)``.

    ``base`` is a norm (constant field) or another chart; ``lam`` is a callable
    on points ``(..., 2)`` or an expression string in ``x`` and ``y``.
    """

    tag = "conformal"

    def __init__(self, base, lam, radius=np.inf, smoothness_step=1e-4):
        self.base = base if isinstance(base, FinslerChart) else ConstantChart(base)
        if isinstance(lam, str):
            self.expression = lam
            lam = compile_expression(lam)
        else:
            self.expression = None
        self.lam = lam
        self.radius = min(radius, self.base.radius)
        self.smoothness_step = smoothness_step

    def _factor(self, x):
        return np.exp(self.lam(np.asarray(x, dtype=float)))

    def norm(self, x, v):
        return self._factor(x) * self.base.norm(x, v)

    def legendre(self, x, v):
        return (self._factor(x) ** 2)[..., None] * self.base.legendre(x, v)

    def tensor(self, x, v):
        return (self._factor(x) ** 2)[..., None, None] * self.base.tensor(x, v)

    def dual(self, x, alpha):
        return self.base.dual(x, alpha) / self._factor(x)

    def spray(self, x, v):
        if not isinstance(self.base, ConstantChart):
            return super().spray(x, v)
        # L = exp(2 lam) L0(v): a = g0^-1 (grad lam phi0^2 - 2 (grad lam . v) dL0/dv)
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        h = self.smoothness_step
        grad = np.stack([(self.lam(x + e) - self.lam(x - e)) / (2.0 * h) for e in (np.array([h, 0.0]), np.array([0.0, h]))], axis=-1)
        n0 = self.base.base
        if np.any(np.hypot(v[..., 0], v[..., 1]) == 0):
            raise SingularityError("spray is undefined for zero velocity")
        rhs = grad * (n0(v) ** 2)[..., None] - 2.0 * np.sum(grad * v, axis=-1)[..., None] * n0.legendre(v)
        return _solve2(n0.tensor(v), rhs)

    def dual_direction(self, x, alpha):
        return self.base.dual_direction(x, alpha) / self._factor(x)[..., None]

    @property
    def symmetric(self):
        return self.base.symmetric


class TranslatedChart(FinslerChart):
    """Pull back of ``chart`` by ``x -> x + offset`` (moves ``offset`` to the origin)."""

    def __init__(self, chart: FinslerChart, offset):
        self.chart = chart
        self.offset = np.asarray(offset, dtype=float)
        self.radius = chart.radius - float(np.hypot(*self.offset))
        self.smoothness_step = chart.smoothness_step
        self.tag = chart.tag

    def norm(self, x, v):
        return self.chart.norm(np.asarray(x) + self.offset, v)

    def legendre(self, x, v):
        return self.chart.legendre(np.asarray(x) + self.offset, v)

    def tensor(self, x, v):
        return self.chart.tensor(np.asarray(x) + self.offset, v)

    def dual(self, x, alpha):
        return self.chart.dual(np.asarray(x) + self.offset, alpha)

    def dual_direction(self, x, alpha):
        return self.chart.dual_direction(np.asarray(x) + self.offset, alpha)

    def spray(self, x, v):
        return self.chart.spray(np.asarray(x) + self.offset, v)

    @property
    def symmetric(self):
        return self.chart.symmetric


def normalize(chart: FinslerChart, p0) -> FinslerChart:
    """Move the basepoint ``p0`` to the chart origin."""
    p0 = np.asarray(p0, dtype=float)
    if np.all(p0 == 0):
        return chart
    return TranslatedChart(chart, p0)


def frozen_norm(chart: FinslerChart, x) -> MinkowskiNorm:
    """The norm ``phi(x, .)`` at one point, in closed form when the chart allows it."""
    x = np.asarray(x, dtype=float)
    if isinstance(chart, ConstantChart):
        return chart.base
    if isinstance(chart, TranslatedChart):
        return frozen_norm(chart.chart, x + chart.offset)
    if isinstance(chart, ConformalChart):
        inner = frozen_norm(chart.base, x)
        c = float(chart._factor(x))
        if c == 1.0:
            return inner
        if isinstance(inner, RandersNorm):
            return RandersNorm(c * c * inner.A, c * inner.b)
        if isinstance(inner, TabulatedNorm):
            return TabulatedNorm(c * inner.support)
        return MinkowskiNorm(lambda v: c * inner(v), symmetric=inner.symmetric)
    return chart.norm_at(x)


def sphere_cap_chart(curvature=1.0, radius=10.0) -> ConformalChart:
    """Round sphere of constant curvature ``K`` in stereographic coordinates.

    ``phi = 2 |v| / (1 + K |x|^2)``; conjugate points appear at distance
    ``pi / sqrt(K)``.
    """
    K = float(curvature)
    chart = ConformalChart(
        norm_from_spec({"kind": "euclidean"}),
        lambda x: np.log(2.0) - np.log1p(K * (x[..., 0] ** 2 + x[..., 1] ** 2)),
        radius=radius,
    )
    chart.tag = f"sphere-cap(K={K:g})"
    return chart


# ----------------------------------------------------------------------------
# expression grammar for conformal factors

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
}


def compile_expression(text: str) -> Callable:
    """Compile ``text`` (identifiers x, y; + - * /; parentheses; sin cos exp) to a point function."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise InvalidArgument(f"cannot parse expression {text!r}: {exc}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            value = float(node.value)
            return lambda p: np.full(p.shape[:-1], value)
        if isinstance(node, ast.Name) and node.id in ("x", "y"):
            i = 0 if node.id == "x" else 1
            return lambda p: p[..., i]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            sign = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return lambda p: sign * inner(p)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = build(node.left), build(node.right)
            return lambda p: op(left(p), right(p))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            fn, arg = _FUNCS[node.func.id], build(node.args[0])
            return lambda p: fn(arg(p))
        raise InvalidArgument(f"unsupported syntax in expression {text!r}: {ast.dump(node)}")

    fn = build(tree)
    return lambda p: fn(np.asarray(p, dtype=float))


def chart_from_spec(spec: dict) -> FinslerChart:
    """Chart from a JSON spec: a norm fragment plus optional ``lambda`` and ``radius``."""
    norm_spec = spec.get("norm", spec)
    base = norm_from_spec(norm_spec)
    radius = float(spec.get("radius", np.inf))
    lam = spec.get("lambda")
    if lam is None:
        return ConstantChart(base, radius=radius)
    chart = ConformalChart(base, str(lam), radius=radius)
    return chart


# ----------------------------------------------------------------------------
# integration


def chart_scan_dual(chart, x, alpha, n_dirs=256, tol=1e-10):
    """Pointwise dual norm ``sup alpha(u) / phi(x, u)`` and the maximising angle."""
    x, alpha = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(alpha, dtype=float))
    shape = x.shape[:-1]
    xf = x.reshape(-1, 2)
    af = alpha.reshape(-1, 2)
    step = TWO_PI / n_dirs
    psi = np.arange(n_dirs) * step
    u = unit(psi)
    ratio = (af @ u.T) / chart.norm(xf[:, None, :], u[None, :, :])
    k = np.argmax(ratio, axis=1)

    def objective(t):
        w = unit(t)
        return np.einsum("ni,ni->n", af, w) / chart.norm(xf, w)

    best, val = golden_max(objective, psi[k] - step, psi[k] + step, tol=tol)
    return val.reshape(shape), best.reshape(shape)


def rk4_step(chart: FinslerChart, x, v, h):
    """One classical RK4 step of the geodesic ODE; ``h`` may be an array."""
    h = np.asarray(h, dtype=float)
    hh = h[..., None] if h.ndim else h
    a1 = chart.spray(x, v)
    x2, v2 = x + 0.5 * hh * v, v + 0.5 * hh * a1
    a2 = chart.spray(x2, v2)
    x3, v3 = x + 0.5 * hh * v2, v + 0.5 * hh * a2
    a3 = chart.spray(x3, v3)
    x4, v4 = x + hh * v3, v + hh * a3
    a4 = chart.spray(x4, v4)
    x_new = x + (hh / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + (hh / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return x_new, v_new


def integrate(chart: FinslerChart, x0, v0, h, n_steps):
    """Fixed-step RK4 for a batch; returns position and velocity arrays of shape (n+1, ..., 2)."""
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    xs = np.empty((n_steps + 1,) + x.shape)
    vs = np.empty((n_steps + 1,) + v.shape)
    xs[0], vs[0] = x, v
    for i in range(n_steps):
        x, v = rk4_step(chart, x, v, h)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise NumericalFailure(f"geodesic integration diverged at step {i + 1}")
        xs[i + 1], vs[i + 1] = x, v
    return xs, vs


@dataclass
class GeodesicPath:
    """Samples ``(t, x(t), v(t))`` of a geodesic."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    metric_tag: str = "chart"
    truncated: bool = False
    _spline: CubicHermiteSpline | None = field(default=None, repr=False)

    @property
    def endpoint(self):
        return self.x[-1]

    def at(self, t):
        """Position at time ``t`` by cubic Hermite interpolation of the samples."""
        if self._spline is None:
            order = np.argsort(self.t)
            self._spline = CubicHermiteSpline(self.t[order], self.x[order], self.v[order], axis=0)
        return self._spline(t)

    def length(self, chart: FinslerChart) -> float:
        """Length by the trapezoid rule on the samples."""
        speed = chart.norm(self.x, self.v)
        return float(np.sum(0.5 * (speed[1:] + speed[:-1]) * np.abs(np.diff(self.t))))

    def speed_defect(self, chart: FinslerChart) -> float:
        return float(np.max(np.abs(chart.norm(self.x, self.v) - 1.0)))

    def rows(self):
        return np.column_stack([self.t, self.x, self.v])


def shoot(chart: FinslerChart, x0, v0, T, dt=DEFAULT_DT, tol_speed=TOL_SPEED) -> GeodesicPath:
    """Unit-speed geodesic from ``(x0, v0)`` up to time ``T`` (negative ``T`` runs backwards).

    If the curve leaves the chart domain, the samples inside the domain are kept and
    the path is flagged ``truncated``.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    speed = float(chart.norm(x0, v0))
    if abs(speed - 1.0) > tol_speed:
        raise InvalidArgument(f"initial velocity has speed {speed}, expected 1")
    n = max(1, int(np.ceil(abs(T) / dt - 1e-9)))
    h = T / n
    ts, xs, vs = [0.0], [x0], [v0]
    x, v = x0, v0
    truncated = False
    for i in range(n):
        x, v = rk4_step(chart, x, v, h)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise NumericalFailure(f"geodesic integration diverged at step {i + 1}")
        if not chart.contains(x):
            truncated = True
            break
        ts.append((i + 1) * h)
        xs.append(x)
        vs.append(v)
    return GeodesicPath(np.array(ts), np.array(xs), np.array(vs), chart.tag, truncated)


def unit_velocity(chart: FinslerChart, x, angle):
    """Unit-speed velocity at ``x`` pointing along ``angle``."""
    u = unit(angle)
    return u / chart.norm(x, u)[..., None]


def _refine_crossing(chart, x, v, h, center, radius, iters=6):
    """Sub-step ``tau`` in ``[0, h]`` at which ``|X(tau) - c| = R`` for the RK4 map."""
    def f(tau):
        xn, vn = rk4_step(chart, x, v, tau)
        d = xn - center
        return np.einsum("ni,ni->n", d, d) - radius**2, xn, vn

    lo = np.zeros_like(h)
    hi = h.copy()
    f_lo = np.einsum("ni,ni->n", x - center, x - center) - radius**2
    f_hi, _, _ = f(hi)
    for _ in range(iters):
        # regula falsi with Illinois damping keeps both ends bracketing
        tau = np.where(f_hi != f_lo, hi - f_hi * (hi - lo) / (f_hi - f_lo), 0.5 * (lo + hi))
        tau = np.clip(tau, np.minimum(lo, hi), np.maximum(lo, hi))
        f_tau, _, _ = f(tau)
        same = np.sign(f_tau) == np.sign(f_hi)
        lo, f_lo = np.where(same, lo, hi), np.where(same, 0.5 * f_lo, f_hi)
        hi, f_hi = tau, f_tau
    _, xn, vn = f(hi)
    return hi, xn, vn


def exit_circle(chart, x0, v0, center, radius, h, max_steps):
    """Integrate a batch until each curve first crosses the circle ``|x - c| = R`` outward.

    Returns:
        (exit time, exit point, exit velocity, reached flag), one entry per curve.
    """
    x = np.array(x0, dtype=float).reshape(-1, 2)
    v = np.array(v0, dtype=float).reshape(-1, 2)
    n = x.shape[0]
    center = np.broadcast_to(np.asarray(center, dtype=float), (n, 2))
    radius = np.broadcast_to(np.asarray(radius, dtype=float), (n,))
    h = np.broadcast_to(np.asarray(h, dtype=float), (n,)).copy()
    t = np.zeros(n)
    done = np.zeros(n, bool)
    t_exit = np.full(n, np.nan)
    x_exit = np.full((n, 2), np.nan)
    v_exit = np.full((n, 2), np.nan)
    f_prev = np.einsum("ni,ni->n", x - center, x - center) - radius**2
    for _ in range(max_steps):
        act = ~done
        if not act.any():
            break
        xa, va = rk4_step(chart, x[act], v[act], h[act])
        if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(va))):
            raise NumericalFailure("geodesic integration diverged while shooting")
        f_new = np.einsum("ni,ni->n", xa - center[act], xa - center[act]) - radius[act] ** 2
        crossed = (f_prev[act] < 0) & (f_new >= 0)
        idx = np.flatnonzero(act)
        if crossed.any():
            ci = idx[crossed]
            tau, xc, vc = _refine_crossing(chart, x[ci], v[ci], h[ci], center[ci], radius[ci])
            t_exit[ci] = t[ci] + tau
            x_exit[ci] = xc
            v_exit[ci] = vc
            done[ci] = True
        keep = idx[~crossed]
        x[keep], v[keep] = xa[~crossed], va[~crossed]
        t[keep] += h[keep]
        f_prev[keep] = f_new[~crossed]
    return t_exit, x_exit, v_exit, done


@dataclass
class _BVPResult:
    distance: np.ndarray
    angle: np.ndarray
    residual: np.ndarray
    converged: np.ndarray


def _bvp(chart, xs, ys, dt, tol, max_iter, n_min=32, n_max=1024):
    xs = np.asarray(xs, dtype=float).reshape(-1, 2)
    ys = np.asarray(ys, dtype=float).reshape(-1, 2)
    n = xs.shape[0]
    diff = ys - xs
    R = np.hypot(diff[:, 0], diff[:, 1])
    target = np.arctan2(diff[:, 1], diff[:, 0])
    dist = np.zeros(n)
    angle = target.copy()
    residual = np.zeros(n)
    converged = R == 0
    live = ~converged
    if not live.any():
        return _BVPResult(dist, angle, residual, converged)
    chord = chart.norm(xs, diff)
    steps = np.clip(np.ceil(chord / dt), n_min, n_max)
    h = chord / steps

    def miss(psi, sel):
        v0 = unit_velocity(chart, xs[sel], psi)
        t, xe, _, ok = exit_circle(chart, xs[sel], v0, xs[sel], R[sel], h[sel], int(3 * steps[sel].max()))
        m = wrap_angle(np.arctan2(xe[:, 1] - xs[sel, 1], xe[:, 0] - xs[sel, 0]) - target[sel])
        return np.where(ok, m, np.nan), t

    sel = np.flatnonzero(live)
    p0 = target[sel].copy()
    m0, t0 = miss(p0, sel)
    p1 = p0 - np.nan_to_num(m0)
    best_p, best_m, best_t = p0.copy(), m0.copy(), t0.copy()
    m1, t1 = miss(p1, sel)
    for _ in range(max_iter):
        better = np.abs(np.nan_to_num(m1, nan=np.inf)) < np.abs(np.nan_to_num(best_m, nan=np.inf))
        best_p = np.where(better, p1, best_p)
        best_m = np.where(better, m1, best_m)
        best_t = np.where(better, t1, best_t)
        done = np.abs(np.nan_to_num(best_m, nan=np.inf)) <= tol
        if done.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = (m1 - m0) / (p1 - p0)
        bad = ~np.isfinite(slope) | (slope <= 0)
        slope = np.where(bad, 1.0, slope)
        step = np.clip(-np.nan_to_num(m1) / slope, -0.5, 0.5)
        p_next = np.where(done, p1, p1 + step)
        m_next = m1.copy()
        t_next = t1.copy()
        act = ~done
        if act.any():
            m_act, t_act = miss(p_next[act], sel[act])
            m_next[act], t_next[act] = m_act, t_act
        p0, m0 = p1, m1
        p1, m1, t1 = p_next, m_next, t_next
    dist[sel] = best_t
    angle[sel] = best_p
    residual[sel] = np.abs(best_m)
    converged[sel] = np.abs(np.nan_to_num(best_m, nan=np.inf)) <= tol
    return _BVPResult(dist, angle, residual, converged)


BVP_DT = 0.02


def distances(chart: FinslerChart, xs, ys, dt=BVP_DT, tol=1e-10, max_iter=50) -> np.ndarray:
    """Vectorised :func:`distance` over pairs of points (leading axes are batch axes)."""
    xs = np.asarray(xs, dtype=float)
    res = _bvp(chart, xs, ys, dt, tol, max_iter)
    if not res.converged.all():
        worst = float(np.max(res.residual[~res.converged]))
        raise NumericalFailure(f"shooting did not converge (angular residual {worst:.3g})", residual=worst)
    return res.distance.reshape(xs.shape[:-1])


def distance(chart: FinslerChart, x, y, dt=BVP_DT, tol=1e-10, max_iter=50) -> float:
    """Length of the geodesic from ``x`` to ``y`` found by shooting on the initial angle.

    The shooting target is the circle ``|z - x| = |y - x|``; the miss is the angle
    between the crossing point and ``y`` as seen from ``x``, driven to zero by
    secant iteration started at the chord direction.
    """
    return float(distances(chart, np.asarray(x, dtype=float)[None], np.asarray(y, dtype=float)[None], dt, tol, max_iter)[0])


def connecting_geodesic(chart: FinslerChart, x, y, dt=BVP_DT, tol=1e-10, max_iter=50):
    """Distance and the sampled connecting geodesic (its last sample is the hit point)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    res = _bvp(chart, x[None], y[None], dt, tol, max_iter)
    if not res.converged[0]:
        raise NumericalFailure("shooting did not converge", residual=float(res.residual[0]))
    d = float(res.distance[0])
    if d == 0:
        return 0.0, GeodesicPath(np.zeros(1), x[None], np.zeros((1, 2)), chart.tag)
    v0 = unit_velocity(chart, x, res.angle[0])
    chord = float(chart.norm(x, y - x))
    h = chord / np.clip(np.ceil(chord / dt), 32, 1024)
    n_full = int(np.floor(d / h))
    xs, vs = integrate(chart, x, v0, h, n_full)
    tail = d - n_full * h
    xe, ve = rk4_step(chart, xs[-1], vs[-1], tail)
    ts = np.append(np.arange(n_full + 1) * h, d)
    path = GeodesicPath(ts, np.vstack([xs, xe[None]]), np.vstack([vs, ve[None]]), chart.tag)
    return d, path


@dataclass
class SimplicityReport:
    is_simple: bool
    worst_pair: tuple | None
    reason: str
    min_variation: float


def check_simple(chart: FinslerChart, center=(0.0, 0.0), eps=0.5, n_boundary=12, n_fan=24, dtheta=1e-4) -> SimplicityReport:
    """Sampled test that the disc ``D(center, eps)`` is simple for ``chart``.

    From each of ``n_boundary`` boundary points a fan of inward geodesics is
    shot until it leaves the disc. The disc passes when (i) every fan member
    exits, (ii) the angular variation field ``det[dgamma/dpsi, gamma']`` keeps
    its sign before exit (no conjugate point inside), (iii) exit angles are
    monotone along each fan, and (iv) the boundary-value solver converges on
    sampled boundary pairs.
    """
    center = np.asarray(center, dtype=float)
    if eps > chart.radius / 2:
        raise InvalidArgument("eps must not exceed half the chart radius")
    beta = np.arange(n_boundary) * (TWO_PI / n_boundary)
    b = center + eps * unit(beta)
    spread = np.pi / 2 - 0.1
    delta = np.linspace(-spread, spread, n_fan)
    psi = (beta[:, None] + np.pi + delta[None, :]).reshape(-1)
    starts = np.repeat(b, n_fan, axis=0)
    m = psi.size
    all_psi = np.concatenate([psi, psi + dtheta, psi - dtheta])
    all_x = np.concatenate([starts] * 3)
    v = unit_velocity(chart, all_x, all_psi)
    scale = float(np.min(chart.norm(center, unit(np.linspace(0, TWO_PI, 33)[:-1]))))
    h = eps * scale / 64.0
    x = all_x.copy()
    exited = np.zeros(m, bool)
    exit_point = np.full((m, 2), np.nan)
    min_det = np.inf
    worst = None
    t = 0.0
    for _ in range(64 * 40):
        x, v = rk4_step(chart, x, v, h)
        t += h
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            return SimplicityReport(False, None, "integration diverged", -np.inf)
        base = x[:m]
        r2 = np.sum((base - center) ** 2, axis=1)
        newly = ~exited & (r2 >= eps**2)
        exit_point[newly] = base[newly]
        exited |= newly
        live = ~exited
        if t > 1e-2 and live.any():
            jac = (x[m:2 * m] - x[2 * m:]) / (2.0 * dtheta)
            det = cross(v[:m], jac)
            det_live = det[live]
            k = int(np.argmin(det_live))
            if det_live[k] < min_det:
                min_det = float(det_live[k])
            if det_live[k] <= 0:
                i = np.flatnonzero(live)[k]
                return SimplicityReport(False, (tuple(starts[i]), tuple(base[i])), "conjugate point inside the disc", min_det)
        if exited.all():
            break
    if not exited.all():
        i = int(np.flatnonzero(~exited)[0])
        return SimplicityReport(False, (tuple(starts[i]), None), "geodesic trapped in the disc", min_det)
    ang = np.arctan2(exit_point[:, 1] - center[1], exit_point[:, 0] - center[0]).reshape(n_boundary, n_fan)
    steps = wrap_angle(np.diff(ang, axis=1))
    for i in range(n_boundary):
        if not (np.all(steps[i] > 0) or np.all(steps[i] < 0)):
            j = int(np.argmin(np.abs(steps[i])))
            return SimplicityReport(False, (tuple(b[i]), tuple(exit_point[i * n_fan + j])), "exit map not monotone", min_det)
    pairs_i = np.arange(n_boundary)
    pairs_j = (pairs_i + n_boundary // 3) % n_boundary
    res = _bvp(chart, b[pairs_i], b[pairs_j], BVP_DT, 1e-10, 50)
    if not res.converged.all():
        k = int(np.argmax(res.residual))
        return SimplicityReport(False, (tuple(b[pairs_i[k]]), tuple(b[pairs_j[k]])), "boundary-value solver failed", min_det)
    return SimplicityReport(True, None, "ok", min_det)


def select_eps(chart: FinslerChart, center=(0.0, 0.0), chart_radius=None, max_halvings=8) -> float:
    """Largest ``R/4 * 2^-k`` for which :func:`check_simple` passes."""
    R = chart.radius if chart_radius is None else chart_radius
    if not np.isfinite(R):
        raise InvalidArgument("a finite chart radius is needed to pick eps")
    eps = R / 4.0
    for _ in range(max_halvings + 1):
        if check_simple(chart, center, eps).is_simple:
            return eps
        eps /= 2.0
    raise NumericalFailure("no simple disc found around the basepoint")
