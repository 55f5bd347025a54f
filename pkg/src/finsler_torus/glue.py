"""Extension, bump blending and periodisation of an enveloping function.

The local field ``F`` (signed distance to the geodesic fan) is glued to the
flat field ``F0`` of the frozen norm ``phi0``:

    F_ext = F0 + chi (F - F0)        chi: bump, 1 on D_eps, 0 outside D_2eps
    F~    = g F_ext + (1 - g) F0     g:   bump, 1 on D_eps, 0 outside D_r

The metric recovered from ``F~`` equals ``phi`` on ``D_eps`` and ``phi0``
outside ``D_r``, so it descends to the torus ``R^2 / (2 l Z)^2``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._numerics import TWO_PI, rot90, unit
from .config import PipelineConfig
from .envelope import (
    EnvelopeField,
    EnvelopeReport,
    build_envelope,
    check_enveloping,
    recover_distance,
    recover_norm,
    support_function,
)
from .errors import ConfigurationError, InvalidArgument
from .geodesics import FinslerChart, frozen_norm, normalize
from .norms import MinkowskiNorm

log = logging.getLogger(__name__)


def _transition(s):
    """Smooth step: 0 for s <= 0, 1 for s >= 1, ``h(1 - s) = 1 - h(s)``."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class BumpProfile:
    """Radial bump ``g(rho) = h((outer - rho) / (outer - inner))``."""

    inner: float
    outer: float

    def __call__(self, rho):
        return _transition((self.outer - np.asarray(rho, dtype=float)) / (self.outer - self.inner))

    def at(self, x):
        x = np.asarray(x, dtype=float)
        return self(np.hypot(x[..., 0], x[..., 1]))


def make_bump(eps: float, r: float) -> BumpProfile:
    if not r > eps:
        raise InvalidArgument(f"bump needs r > eps, got eps={eps}, r={r}")
    return BumpProfile(float(eps), float(r))


def extend_reference(chart: FinslerChart, cfg: PipelineConfig | None = None) -> EnvelopeField:
    """Flat enveloping function of the frozen norm at the origin, exact on the whole plane."""
    n_theta = 256 if cfg is None else cfg.n_theta
    return EnvelopeField(frozen_norm(chart, (0.0, 0.0)), n_theta, label="F0")


def _same_reference(F, F0):
    if F.n_theta != F0.n_theta or not np.array_equal(F.ref_covectors, F0.ref_covectors):
        raise InvalidArgument("fields do not share the flat reference")


def _scaled(F: EnvelopeField, weight, label):
    if F.correction is None:
        return F
    w = weight(F.grid_points())
    return F.with_correction(F.correction * w[None], label=label)


def perturbation_size(F: EnvelopeField) -> dict:
    """Sampled size of ``F - F0`` on the tabulation grid.

    ``value`` and ``fd1``..``fd3`` are max norms of spatial finite differences
    (orders 0 to 3) of the tabulated gap. ``cosphere`` is the largest of
    ``|d^j/dtheta^j grad_x (F - F0)|`` for j = 0, 1, 2: the displacement,
    velocity and acceleration of the co-sphere curves, which is what decides
    whether the perturbed field is still enveloping.
    """
    if F.correction is None:
        return {"value": 0.0, "fd1": 0.0, "fd2": 0.0, "fd3": 0.0, "cosphere": 0.0}
    dx = F.axis[1] - F.axis[0]
    out = {"value": float(np.max(np.abs(F.correction)))}
    for order in (1, 2, 3):
        worst = 0.0
        for a in range(order + 1):
            arr = F.correction
            for axis in [1] * a + [2] * (order - a):
                arr = np.gradient(arr, dx, axis=axis)
            worst = max(worst, float(np.max(np.abs(arr))))
        out[f"fd{order}"] = worst
    grad = F.grid_covectors() - F.ref_covectors[:, None, None, :]
    spec = np.fft.fft(grad, axis=0)
    k = np.fft.fftfreq(F.n_theta, d=1.0 / F.n_theta).reshape(-1, 1, 1, 1)
    sizes = [np.max(np.linalg.norm(grad, axis=-1))]
    for j in (1, 2):
        d = np.real(np.fft.ifft(spec * (1j * k) ** j, axis=0))
        sizes.append(np.max(np.linalg.norm(d, axis=-1)))
    out["cosphere"] = float(max(sizes))
    return out


def extend_envelope(F_local: EnvelopeField, F0: EnvelopeField, cfg: PipelineConfig, budget: float | None = None) -> EnvelopeField:
    """``F_ext = F0 + chi (F_local - F0)`` with ``chi`` the bump over radii (eps, 2 eps)."""
    _same_reference(F_local, F0)
    if F_local.correction is not None and F_local.half_width < 2 * cfg.eps:
        raise InvalidArgument("local table does not cover the extension annulus")
    chi = make_bump(cfg.eps, 2 * cfg.eps)
    F_ext = _scaled(F_local, chi.at, "F_ext")
    budget = cfg.smallness_budget if budget is None else budget
    size = perturbation_size(F_ext)
    log.info("extension gap %s", size)
    if size["cosphere"] > budget:
        raise ConfigurationError(
            f"extension is not a small perturbation of the flat field (co-sphere gap {size['cosphere']:.3g} > {budget}); use a smaller eps"
        )
    return F_ext


def blend(F_ext: EnvelopeField, F0: EnvelopeField, g: BumpProfile) -> EnvelopeField:
    """``g F_ext + (1 - g) F0``: equal to ``F_ext`` on D_eps and to ``F0`` outside D_r."""
    _same_reference(F_ext, F0)
    return _scaled(F_ext, g.at, "F_tilde")


def symmetrize(F: EnvelopeField, chart: FinslerChart | None = None) -> EnvelopeField:
    """Impose ``F(theta + pi, x) = -F(theta, x)`` by averaging the antisymmetric part."""
    if not F.reference.symmetric or (chart is not None and not chart.symmetric):
        raise InvalidArgument("symmetrisation needs a reversible norm")
    if F.correction is None:
        return F
    half = F.n_theta // 2
    corr = 0.5 * (F.correction - np.roll(F.correction, -half, axis=0))
    return F.with_correction(corr, label=F.label)


# ----------------------------------------------------------------------------
# torus metric


class TorusMetric:
    """Metric recovered from ``F~``, descended to the torus ``R^2 / (2 l Z)^2``.

    Outside the support of the tabulated perturbation (in particular outside
    D_r) the norm is ``phi0`` exactly.
    """

    def __init__(self, field: EnvelopeField, eps: float, r: float, l: int, symmetric: bool = False):
        if not r < l:
            raise InvalidArgument(f"need r < l, got r={r}, l={l}")
        self.field = field
        self.eps, self.r, self.l = float(eps), float(r), int(l)
        self.reference: MinkowskiNorm = field.reference
        self.symmetric = symmetric
        self._chart = None

    source = property(lambda self: self.field)

    def wrap(self, x):
        x = np.asarray(x, dtype=float)
        return np.mod(x + self.l, 2 * self.l) - self.l

    def _perturbed(self, wx):
        R = min(self.field.half_width, self.r)
        return (np.abs(wx[:, 0]) < R) & (np.abs(wx[:, 1]) < R)

    def norm(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(x.shape, v.shape)[:-1]
        wx = self.wrap(np.broadcast_to(x, shape + (2,)).reshape(-1, 2))
        vf = np.broadcast_to(v, shape + (2,)).reshape(-1, 2)
        out = np.asarray(self.reference(vf), dtype=float).copy()
        mask = self._perturbed(wx)
        if mask.any():
            out[mask] = recover_norm(self.field, wx[mask], vf[mask])
        return out.reshape(shape) if shape else float(out[0])

    def distance(self, x, y):
        """Sup-formula distance between ``x`` and ``y``, lifted so that ``x`` lies in the fundamental square."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        wx = self.wrap(x)
        return recover_distance(self.field, wx, wx + (y - x))

    norm_fn = norm
    distance_fn = distance

    def chart(self, n_psi: int = 128) -> "RecoveredChart":
        if self._chart is None or self._chart.n_psi != n_psi:
            self._chart = RecoveredChart(self, n_psi)
        return self._chart


def periodize(F_tilde: EnvelopeField, cfg: PipelineConfig, symmetric: bool = False) -> TorusMetric:
    return TorusMetric(F_tilde, cfg.eps, cfg.r, cfg.l, symmetric=symmetric)


class RecoveredChart(FinslerChart):
    """Chart view of a :class:`TorusMetric` for geodesic integration.

    The recovered norm is tabulated as ``Q(x, psi) = phi~(x, u_psi) - phi0(u_psi)``
    over the local grid and ``n_psi`` directions and evaluated with a periodic
    tricubic spline. With ``rho(psi) = phi(x, u_psi)`` the velocity derivatives
    are closed-form in the polar frame ``(u, u_perp)``::

        legendre = rho (rho u + rho' u_perp)
        g = [[rho^2, rho rho'], [rho rho', rho^2 + rho'^2 + rho rho'']]
    """

    tag = "recovered"

    def __init__(self, metric: TorusMetric, n_psi: int = 128, psi_step: float = 1e-3):
        self.metric = metric
        self.n_psi = n_psi
        self.psi_step = psi_step
        self.base = metric.reference
        F = metric.field
        self.radius = np.inf
        if F.correction is None:
            self.half = 0.0
            self.coeffs = None
            return
        self.axis = F.axis
        self.half = min(F.half_width, metric.r)
        self.dx = F.axis[1] - F.axis[0]
        psi = np.arange(n_psi) * (TWO_PI / n_psi)
        dirs = unit(psi)
        cov = np.moveaxis(F.grid_covectors(), 0, 2).reshape(-1, F.n_theta, 2)
        flat = support_function(F.ref_covectors[None], dirs)[0]
        Q = np.zeros((cov.shape[0], n_psi))
        active = np.flatnonzero(np.any(np.abs(cov - F.ref_covectors[None]) > 1e-14, axis=(1, 2)))
        for start in range(0, active.size, 256):
            idx = active[start : start + 256]
            Q[idx] = support_function(cov[idx], dirs) - flat
        self.table = Q.reshape(F.axis.size, F.axis.size, n_psi)
        self.coeffs = ndimage.spline_filter(self.table, order=3, mode="grid-wrap")

    def _inside(self, wx):
        return (np.abs(wx[:, 0]) < self.half) & (np.abs(wx[:, 1]) < self.half)

    def _q(self, wx, psi):
        coords = np.stack(
            [(wx[:, 0] + self.axis[-1]) / self.dx, (wx[:, 1] + self.axis[-1]) / self.dx, np.mod(psi, TWO_PI) * (self.n_psi / TWO_PI)]
        )
        return ndimage.map_coordinates(self.coeffs, coords, order=3, mode="grid-wrap", prefilter=False)

    def _rho(self, x, v, derivatives=False):
        """Returns (speed, psi, rho[, rho', rho'']) for flattened inputs."""
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        shape = x.shape[:-1]
        wx = self.metric.wrap(x.reshape(-1, 2))
        vf = v.reshape(-1, 2)
        speed = np.hypot(vf[:, 0], vf[:, 1])
        psi = np.arctan2(vf[:, 1], vf[:, 0])
        h = self.psi_step
        shifts = (0.0, -h, h) if derivatives else (0.0,)
        rhos = [np.asarray(self.base(unit(psi + s)), dtype=float) for s in shifts]
        if self.coeffs is not None:
            inside = self._inside(wx)
            if inside.any():
                for rho, s in zip(rhos, shifts):
                    rho[inside] += self._q(wx[inside], psi[inside] + s)
        return shape, speed, psi, rhos

    def norm(self, x, v):
        shape, speed, _, (rho,) = self._rho(x, v)
        return (speed * rho).reshape(shape)

    def _polar(self, x, v):
        shape, speed, psi, (rho, rm, rp) = self._rho(x, v, derivatives=True)
        h = self.psi_step
        d1 = (rp - rm) / (2 * h)
        d2 = (rp - 2 * rho + rm) / (h * h)
        return shape, speed, unit(psi), rho, d1, d2

    def legendre(self, x, v):
        shape, speed, u, rho, d1, _ = self._polar(x, v)
        out = (speed * rho)[:, None] * (rho[:, None] * u + d1[:, None] * rot90(u))
        return out.reshape(shape + (2,))

    def tensor(self, x, v):
        shape, _, u, rho, d1, d2 = self._polar(x, v)
        n = rot90(u)
        a, b, c = rho * rho, rho * d1, rho * rho + d1 * d1 + rho * d2
        g = (
            a[:, None, None] * u[:, :, None] * u[:, None, :]
            + b[:, None, None] * (u[:, :, None] * n[:, None, :] + n[:, :, None] * u[:, None, :])
            + c[:, None, None] * n[:, :, None] * n[:, None, :]
        )
        return g.reshape(shape + (2, 2))

    def spray(self, x, v):
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        out = np.zeros(x.shape)
        if self.coeffs is None:
            return out
        xf = x.reshape(-1, 2)
        vf = v.reshape(-1, 2)
        # one spatial step of margin so the finite differences see the whole patch
        wx = self.metric.wrap(xf)
        near = (np.abs(wx[:, 0]) < self.half + 2 * self.smoothness_step) & (np.abs(wx[:, 1]) < self.half + 2 * self.smoothness_step)
        if near.any():
            out.reshape(-1, 2)[near] = super().spray(xf[near], vf[near])
        return out

    @property
    def symmetric(self):
        return self.metric.symmetric


# ----------------------------------------------------------------------------
# pipeline


@dataclass
class PipelineResult:
    metric: TorusMetric
    cfg: PipelineConfig
    F_local: EnvelopeField
    F0: EnvelopeField
    F_ext: EnvelopeField
    F_tilde: EnvelopeField
    chart: FinslerChart
    report: EnvelopeReport
    escalations: int = 0
    gap: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def run_pipeline(chart: FinslerChart, cfg: PipelineConfig, symmetric: bool = False, threads: int = 1) -> PipelineResult:
    """normalize -> build_envelope -> extend -> blend -> (symmetrize) -> periodize.

    If the blended field fails the enveloping check, ``r`` is doubled (and
    ``l = ceil(r) + 1``) up to ``cfg.max_escalations`` times.
    """
    timings = {}
    t0 = time.perf_counter()
    local = normalize(chart, cfg.p0)
    if symmetric and not local.symmetric:
        raise InvalidArgument("symmetric variant requested for a non-reversible metric")
    F_local = build_envelope(local, cfg, check=True, threads=threads)
    if symmetric:
        F_local = symmetrize(F_local, local)
    timings["envelope"] = time.perf_counter() - t0
    F0 = extend_reference(local, cfg)
    F_ext = extend_envelope(F_local, F0, cfg)
    gap = perturbation_size(F_ext)
    escalations = 0
    while True:
        t1 = time.perf_counter()
        F_tilde = blend(F_ext, F0, make_bump(cfg.eps, cfg.r))
        report = check_enveloping(F_tilde, local, chart_radius=cfg.eps, tol_dl=cfg.tol_dl)
        timings[f"blend_r{cfg.r:g}"] = time.perf_counter() - t1
        log.info("r=%g l=%d enveloping=%s violation=%.3g", cfg.r, cfg.l, report.passed, report.distance_like_violation)
        if report.passed:
            break
        if escalations == cfg.max_escalations:
            raise ConfigurationError(
                f"blended field is not enveloping after {escalations} escalations "
                f"(violation {report.distance_like_violation:.3g}, witness {report.witness})"
            )
        escalations += 1
        cfg = cfg.escalated()
    metric = periodize(F_tilde, cfg, symmetric=symmetric)
    timings["total"] = time.perf_counter() - t0
    return PipelineResult(metric, cfg, F_local, F0, F_ext, F_tilde, local, report, escalations, gap, timings)
