"""Construction parameters for the gluing pipeline."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

from .errors import InvalidArgument


@dataclass(frozen=True)
class PipelineConfig:
    """All scalars of the construction.

    ``eps`` is the radius of the preserved disc, ``r`` the outer radius of the
    blend and ``l`` the half-period of the torus ``R^2 / (2 l Z)^2``.
    """

    eps: float = 0.25
    r: float = 8.0
    l: int | None = None
    p0: tuple = (0.0, 0.0)
    n_theta: int = 256
    n_x: int = 129
    local_extent: float = 2.4  # half-width of the tabulated square, in units of eps
    envelope_steps: int = 64  # RK4 steps per side for fan and transversal geodesics
    n_psi: int = 128  # directions in the recovered-norm table
    dt: float = 1e-3
    tol_dl: float = 1e-3
    tol_convex: float = 1e-6
    tol_speed: float = 1e-6
    smallness_budget: float = 0.5
    max_escalations: int = 4
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.l is None:
            object.__setattr__(self, "l", int(math.ceil(self.r)) + 1)
        object.__setattr__(self, "p0", tuple(float(c) for c in self.p0))
        if not (0 < self.eps < self.r):
            raise InvalidArgument(f"need 0 < eps < r, got eps={self.eps}, r={self.r}")
        if int(self.l) != self.l or self.l <= self.r:
            raise InvalidArgument(f"need an integer l > r, got l={self.l}, r={self.r}")
        if self.n_theta % 2 or self.n_theta < 16:
            raise InvalidArgument("n_theta must be even and at least 16")
        if self.n_x < 9:
            raise InvalidArgument("n_x must be at least 9")

    @property
    def half_width(self) -> float:
        return self.local_extent * self.eps

    def escalated(self) -> "PipelineConfig":
        """Same configuration with ``r`` doubled and ``l = ceil(r) + 1``."""
        r = 2.0 * self.r
        return replace(self, r=r, l=int(math.ceil(r)) + 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p0"] = list(self.p0)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        if "p0" in d:
            d["p0"] = tuple(d["p0"])
        return cls(**d)
