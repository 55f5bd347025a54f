"""Small numerical kernels used across modules."""

from __future__ import annotations

import numpy as np

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
TWO_PI = 2.0 * np.pi


def unit(angle):
    """Unit vectors (cos, sin) for an array of angles; shape (..., 2)."""
    angle = np.asarray(angle, dtype=float)
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1)


def rot90(v):
    """Rotate planar vectors counter-clockwise by a quarter turn."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def wrap_angle(a):
    """Map angles into [-pi, pi)."""
    return (np.asarray(a) + np.pi) % TWO_PI - np.pi


def golden_max(f, lo, hi, tol=1e-10, max_iter=200):
    """Vectorised golden-section maximisation of ``f`` on ``[lo, hi]``.

    ``f`` maps an array of abscissae (same shape as ``lo``) to values. Each
    entry is an independent unimodal problem; iteration stops once every
    bracket is narrower than ``tol``.

    Returns:
        (argmax, max) arrays.
    """
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        left = fc > fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c_next = np.where(left, b - GOLDEN * (b - a), d)
        d_next = np.where(left, c, a + GOLDEN * (b - a))
        probe = f(np.where(left, c_next, d_next))
        fc, fd = np.where(left, probe, fd), np.where(left, fc, probe)
        c, d = c_next, d_next
    x = 0.5 * (a + b)
    return x, f(x)


class PeriodicSpline:
    """Interpolating cubic spline on a uniform periodic grid ``k * 2pi / n``.

    Data may carry trailing dimensions; interpolation acts along axis 0. The
    circulant system for the second derivatives is solved with an FFT.
    """

    def __init__(self, values):
        y = np.asarray(values, dtype=float)
        n = y.shape[0]
        self.n = n
        self.h = TWO_PI / n
        self.y = y
        rhs = (np.roll(y, -1, axis=0) - 2.0 * y + np.roll(y, 1, axis=0)) * (6.0 / self.h**2)
        k = np.arange(n)
        eig = 4.0 + 2.0 * np.cos(TWO_PI * k / n)
        eig = eig.reshape((n,) + (1,) * (y.ndim - 1))
        self.m = np.real(np.fft.ifft(np.fft.fft(rhs, axis=0) / eig, axis=0))

    def _segment(self, theta):
        t = np.asarray(theta, dtype=float) % TWO_PI
        pos = t / self.h
        k = np.minimum(np.floor(pos).astype(int), self.n - 1)
        s = pos - k
        return k, (k + 1) % self.n, s

    def __call__(self, theta, index=None, derivative=0):
        """Evaluate at ``theta``.

        With ``index`` (an integer array broadcastable against ``theta``), the
        trailing data axis is indexed pointwise: entry ``i`` is evaluated at
        column ``index[i]``. Otherwise every column is evaluated at every
        theta (result shape theta.shape + trailing shape).
        """
        k0, k1, s = self._segment(theta)
        h = self.h
        if index is None:
            y0, y1, m0, m1 = self.y[k0], self.y[k1], self.m[k0], self.m[k1]
            s = s.reshape(s.shape + (1,) * (self.y.ndim - 1))
        else:
            y0, y1 = self.y[k0, index], self.y[k1, index]
            m0, m1 = self.m[k0, index], self.m[k1, index]
            s = s.reshape(s.shape + (1,) * (y0.ndim - s.ndim))
        r = 1.0 - s
        if derivative == 0:
            return r * y0 + s * y1 + (h * h / 6.0) * ((r**3 - r) * m0 + (s**3 - s) * m1)
        if derivative == 1:
            return (y1 - y0) / h + (h / 6.0) * (-(3.0 * r * r - 1.0) * m0 + (3.0 * s * s - 1.0) * m1)
        if derivative == 2:
            return r * m0 + s * m1
        raise ValueError("derivative must be 0, 1 or 2")


_MASK64 = (1 << 64) - 1


class XorShift64Star:
    """xorshift64* generator; fixed update rule for cross-language reproducibility.

    State update (64-bit unsigned arithmetic)::

        x ^= x >> 12; x ^= x << 25; x ^= x >> 27
        out = x * 0x2545F4914F6CDD1D

    The seed is scrambled once with splitmix64 so that small seeds give
    well-mixed, nonzero states. Doubles use the top 53 bits of ``out``.
    """

    def __init__(self, seed: int):
        z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        self.state = z or 0x2545F4914F6CDD1D

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def random(self, size=None):
        """Uniform doubles in [0, 1)."""
        if size is None:
            return (self.next_u64() >> 11) * 2.0**-53
        n = int(np.prod(size))
        out = np.array([(self.next_u64() >> 11) * 2.0**-53 for _ in range(n)])
        return out.reshape(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return low + (high - low) * self.random(size)
