"""Minkowski norms on the plane: evaluation, fundamental tensor, duality.

Every norm is vectorised over leading axes: vectors have shape ``(..., 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from ._numerics import TWO_PI, golden_max, unit
from .errors import InvalidArgument, NumericalFailure, SingularityError

TOL_CONVEX = 1e-6
TOL_DUAL = 1e-10
FD_REL_STEP = 1e-4
N_SCAN = 256


def _as_vec(v):
    v = np.asarray(v, dtype=float)
    if v.shape[-1:] != (2,):
        raise InvalidArgument(f"expected trailing dimension 2, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgument("non-finite vector")
    return v


def fd_gradient(f, v, rel_step=FD_REL_STEP):
    """Central-difference gradient of a scalar field of planar vectors.

    One Richardson step combines spacings ``h`` and ``10 h`` where
    ``h = rel_step * |v|``.
    """
    v = np.asarray(v, dtype=float)
    scale = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)

    def central(h):
        out = []
        for i in range(2):
            e = np.zeros(2)
            e[i] = 1.0
            out.append((f(v + h * e) - f(v - h * e)) / (2.0 * h[..., 0]))
        return np.stack(out, axis=-1)

    h = rel_step * scale
    return (100.0 * central(h) - central(10.0 * h)) / 99.0


def fd_hessian(f, v, rel_step=FD_REL_STEP):
    """Central-difference Hessian with the same Richardson scheme as ``fd_gradient``."""
    v = np.asarray(v, dtype=float)
    scale = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.0, 1.0])

    def central(h):
        f0 = f(v)
        hh = h[..., 0]
        d11 = (f(v + h * e1) - 2.0 * f0 + f(v - h * e1)) / hh**2
        d22 = (f(v + h * e2) - 2.0 * f0 + f(v - h * e2)) / hh**2
        d12 = (
            f(v + h * (e1 + e2)) - f(v + h * (e1 - e2)) - f(v - h * (e1 - e2)) + f(v - h * (e1 + e2))
        ) / (4.0 * hh**2)
        row1 = np.stack([d11, d12], axis=-1)
        row2 = np.stack([d12, d22], axis=-1)
        return np.stack([row1, row2], axis=-2)

    h = rel_step * scale
    return (100.0 * central(h) - central(10.0 * h)) / 99.0


def scan_dual(norm_fn, alpha, n_dirs=N_SCAN, tol=TOL_DUAL):
    """Numerical dual norm and its maximiser for a vectorised norm callable.

    A coarse scan of ``alpha(u) / phi(u)`` over ``n_dirs`` unit directions
    picks a bracket, then golden-section refines the angle to ``tol``.

    Returns:
        (value, angle of the maximiser)
    """
    alpha = np.asarray(alpha, dtype=float)
    psi = np.arange(n_dirs) * (TWO_PI / n_dirs)
    u = unit(psi)
    shape = alpha.shape[:-1]
    a = alpha.reshape(-1, 2)
    ratio = (a @ u.T) / norm_fn(u)
    k = np.argmax(ratio, axis=1)
    step = TWO_PI / n_dirs

    def objective(t):
        w = unit(t)
        return np.einsum("ni,ni->n", a, w) / norm_fn(w)

    best, val = golden_max(objective, psi[k] - step, psi[k] + step, tol=tol)
    if not np.all(np.isfinite(val)):
        raise NumericalFailure("dual-norm refinement produced non-finite values")
    return val.reshape(shape), best.reshape(shape)


class MinkowskiNorm:
    """A planar Minkowski norm given by a vectorised callable.

    Subclasses override the derivative hooks with closed forms; the base class
    uses finite differences and numerical duality.
    """

    kind = "general"

    def __init__(self, func: Callable | None = None, symmetric: bool | None = None):
        self._func = func
        self._symmetric = symmetric

    def __call__(self, v):
        return self._func(np.asarray(v, dtype=float))

    def __repr__(self):
        return f"{type(self).__name__}(kind={self.kind!r})"

    # derivative hooks -------------------------------------------------
    def grad(self, v):
        return fd_gradient(self, v)

    def legendre(self, v):
        """Legendre map ``v -> g(v) v = phi(v) dphi(v)``."""
        return self(v)[..., None] * self.grad(v)

    def tensor(self, v):
        return fd_hessian(lambda w: 0.5 * self(w) ** 2, v)

    def dual(self, alpha):
        return scan_dual(self, alpha)[0]

    def dual_direction(self, alpha):
        """Unit vector ``v`` (``phi(v) = 1``) maximising ``alpha(v)``."""
        _, psi = scan_dual(self, alpha)
        u = unit(psi)
        return u / self(u)[..., None]

    @property
    def symmetric(self) -> bool:
        if self._symmetric is None:
            u = unit(np.linspace(0.0, TWO_PI, 97)[:-1])
            self._symmetric = bool(np.allclose(self(u), self(-u), rtol=1e-12, atol=0.0))
        return self._symmetric

    def spec(self) -> dict:
        raise InvalidArgument("callable norms have no portable JSON form; tabulate first")


class RandersNorm(MinkowskiNorm):
    """``phi(v) = sqrt(v^T A v) + b . v`` with closed-form derivatives and dual."""

    kind = "randers"

    def __init__(self, A=((1.0, 0.0), (0.0, 1.0)), b=(0.0, 0.0)):
        A = np.array(A, dtype=float)
        b = np.array(b, dtype=float)
        if A.shape != (2, 2) or b.shape != (2,):
            raise InvalidArgument("Randers data needs a 2x2 matrix and a 2-vector")
        if not np.allclose(A, A.T) or np.any(np.linalg.eigvalsh(A) <= 0):
            raise InvalidArgument("Randers matrix must be symmetric positive definite")
        self.A = A
        self.b = b
        self.A_inv = np.linalg.inv(A)
        self.b_sq = float(b @ self.A_inv @ b)
        if self.b_sq >= 1.0:
            raise InvalidArgument("Randers drift must satisfy |b|_{A^-1} < 1")
        super().__init__(symmetric=bool(np.all(b == 0.0)))

    def _alpha(self, v):
        return np.sqrt(np.sum((v @ self.A) * v, axis=-1))

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return self._alpha(v) + v @ self.b

    def grad(self, v):
        v = np.asarray(v, dtype=float)
        a = self._alpha(v)
        if np.any(a == 0):
            raise SingularityError("norm gradient undefined at the zero vector")
        return (v @ self.A) / a[..., None] + self.b

    def tensor(self, v):
        v = _as_vec(v)
        a = self._alpha(v)
        if np.any(a == 0):
            raise SingularityError("fundamental tensor undefined at the zero vector")
        Av = v @ self.A
        d = Av / a[..., None] + self.b
        phi = a + v @ self.b
        hess = self.A / a[..., None, None] - Av[..., :, None] * Av[..., None, :] / a[..., None, None] ** 3
        return d[..., :, None] * d[..., None, :] + phi[..., None, None] * hess

    def _dual_parts(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        s = 1.0 - self.b_sq
        xa = np.sum((alpha @ self.A_inv) * alpha, axis=-1)
        xb = alpha @ (self.A_inv @ self.b)
        root = np.sqrt(s * xa + xb * xb)
        return s, xb, root

    def dual(self, alpha):
        s, xb, root = self._dual_parts(alpha)
        return (root - xb) / s

    def dual_direction(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        s, xb, root = self._dual_parts(alpha)
        Ab = self.A_inv @ self.b
        return ((s * (alpha @ self.A_inv) + xb[..., None] * Ab) / root[..., None] - Ab) / s

    def spec(self) -> dict:
        return {"kind": "randers", "A": self.A.tolist(), "b": self.b.tolist()}


class EuclideanNorm(RandersNorm):
    kind = "euclidean"

    def __init__(self):
        super().__init__()

    def spec(self) -> dict:
        return {"kind": "euclidean"}


class TabulatedNorm(MinkowskiNorm):
    """Norm stored as samples of ``phi`` on the unit circle.

    ``phi`` restricted to unit vectors is the support function of the dual unit
    ball, so these samples determine the norm; between the ``len(support)``
    equally spaced angles it is a periodic cubic spline.
    """

    kind = "tabulated"

    def __init__(self, support):
        support = np.asarray(support, dtype=float)
        if support.ndim != 1 or support.size < 8 or np.any(support <= 0):
            raise InvalidArgument("tabulated support must be >= 8 positive samples")
        self.support = support
        n = support.size
        theta = np.arange(n + 1) * (TWO_PI / n)
        self._spline = CubicSpline(theta, np.append(support, support[0]), bc_type="periodic")
        half = n // 2
        sym = n % 2 == 0 and np.allclose(support, np.roll(support, half), rtol=1e-14, atol=0)
        super().__init__(symmetric=bool(sym))

    @classmethod
    def from_norm(cls, norm, n=256):
        return cls(norm(unit(np.arange(n) * (TWO_PI / n))))

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        r = np.hypot(v[..., 0], v[..., 1])
        psi = np.arctan2(v[..., 1], v[..., 0]) % TWO_PI
        return r * self._spline(psi)

    def grad(self, v):
        v = np.asarray(v, dtype=float)
        psi = np.arctan2(v[..., 1], v[..., 0]) % TWO_PI
        s = self._spline(psi)[..., None]
        ds = self._spline(psi, 1)[..., None]
        return s * unit(psi) + ds * unit(psi + np.pi / 2)

    def spec(self) -> dict:
        return {"kind": "tabulated", "support": self.support.tolist()}


@dataclass(frozen=True)
class Covector:
    """A covector at a chart point; ``components`` pair with vectors by dot product."""

    components: np.ndarray
    basepoint: np.ndarray = np.zeros(2)

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))
        object.__setattr__(self, "basepoint", np.asarray(self.basepoint, dtype=float))
        if not (np.all(np.isfinite(self.components)) and np.all(np.isfinite(self.basepoint))):
            raise InvalidArgument("non-finite covector")

    def __call__(self, v):
        return np.asarray(v, dtype=float) @ self.components


@dataclass(frozen=True)
class ConvexityReport:
    min_eigenvalue: float
    worst_direction: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.min_eigenvalue > self.threshold


def norm_from_spec(spec: dict) -> MinkowskiNorm:
    """Build a norm from its JSON fragment (``kind`` = euclidean | randers | tabulated)."""
    kind = spec.get("kind")
    if kind == "euclidean":
        return EuclideanNorm()
    if kind == "randers":
        return RandersNorm(spec.get("A", [[1.0, 0.0], [0.0, 1.0]]), spec.get("b", [0.0, 0.0]))
    if kind == "tabulated":
        return TabulatedNorm(spec["support"])
    raise InvalidArgument(f"unknown norm kind {kind!r}")


def quartic_norm() -> MinkowskiNorm:
    """``(v1^4 + v2^4)^(1/4)``: convex but not quadratically convex on the axes."""
    return MinkowskiNorm(lambda v: (v[..., 0] ** 4 + v[..., 1] ** 4) ** 0.25, symmetric=True)


# ----------------------------------------------------------------------------
# operations


def evaluate(n: MinkowskiNorm, v) -> np.ndarray:
    """``phi(v)``; zero exactly at the zero vector."""
    v = _as_vec(v)
    out = n(v)
    return np.where(np.all(v == 0, axis=-1), 0.0, out)


def fundamental_tensor(n: MinkowskiNorm, v) -> np.ndarray:
    """Half the Hessian of ``phi^2`` at ``v != 0``."""
    v = _as_vec(v)
    if np.any(np.all(v == 0, axis=-1)):
        raise SingularityError("fundamental tensor is undefined at the origin")
    return n.tensor(v)


def check_quadratic_convexity(n: MinkowskiNorm, n_dirs: int = 64, tol: float = TOL_CONVEX) -> ConvexityReport:
    """Smallest eigenvalue of the fundamental tensor over ``n_dirs`` equally spaced directions."""
    if n_dirs < 8:
        raise InvalidArgument("need at least 8 sample directions")
    psi = np.arange(n_dirs) * (TWO_PI / n_dirs)
    eig = np.linalg.eigvalsh(n.tensor(unit(psi)))[:, 0]
    k = int(np.argmin(eig))
    return ConvexityReport(float(eig[k]), float(psi[k]), tol)


def dual_norm(n: MinkowskiNorm, alpha, n_dirs: int = N_SCAN, tol: float = TOL_DUAL):
    """``phi*(alpha) = sup {alpha(v) : phi(v) = 1}`` by angular scan and golden refinement."""
    if isinstance(alpha, Covector):
        alpha = alpha.components
    return scan_dual(n, _as_vec(alpha), n_dirs=n_dirs, tol=tol)[0]


def cosphere(n: MinkowskiNorm, n_dirs: int = 256, basepoint=(0.0, 0.0)) -> list[Covector]:
    """Discretised unit sphere of the dual norm, as Legendre images of indicatrix points."""
    psi = np.arange(n_dirs) * (TWO_PI / n_dirs)
    u = unit(psi)
    v = u / n(u)[:, None]
    g = n.tensor(v)
    if np.min(np.linalg.eigvalsh(g)[:, 0]) <= TOL_CONVEX:
        raise SingularityError("degenerate fundamental tensor on the indicatrix")
    alpha = np.einsum("nij,nj->ni", g, v)
    return [Covector(a, basepoint) for a in alpha]
