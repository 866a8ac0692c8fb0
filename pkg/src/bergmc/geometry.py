"""Model Kähler base manifolds: the flat plane and the round sphere.

Both models are complex one-dimensional and conformally flat in their charts,
so the metric is ``g = lam(z) * I`` with a scalar conformal factor ``lam``.
The factor is pinned by the prequantum condition: ``lam = 4 * hbar * d_z d_zbar phi``
with ``phi`` the Kähler potential of the line bundle (``hbar = 1/k`` on the
sphere).  This gives ``lam = 4`` on the plane for every ``hbar`` and the unit
round sphere ``lam = 4 / (1 + |z|^2)^2`` for every level ``k``.

Sphere charts are stereographic: chart 0 ("south") has ``z = 0`` at the south
pole, chart 1 ("north") has ``w = 0`` at the north pole, and the transition is
the holomorphic map ``w = 1 / z``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError

PLANE = "plane"
SPHERE = "sphere"

SOUTH, NORTH = 0, 1
# Sphere points are kept in a chart with |z| <= 1 + CHART_MARGIN.  Paths switch
# chart only once |z| leaves this band, which gives hysteresis on [1, 1.5].
CHART_MARGIN = 0.5
SWITCH_RADIUS = 1.0 + CHART_MARGIN


@dataclass(frozen=True)
class KahlerModel:
    """A built-in model geometry.

    ``metric_scale`` multiplies the pinned metric.  It exists so tests can
    build deliberately mis-normalized models; physics code leaves it at 1.
    """

    kind: str
    hbar: float = 1.0
    k: int = 1
    metric_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (PLANE, SPHERE):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == PLANE and not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if self.kind == SPHERE and (int(self.k) != self.k or self.k < 1):
            raise ValueError("sphere level k must be a positive integer")
        if not self.metric_scale > 0:
            raise ValueError("metric_scale must be positive")

    @classmethod
    def plane(cls, hbar: float = 1.0) -> "KahlerModel":
        return cls(PLANE, hbar=float(hbar))

    @classmethod
    def sphere(cls, k: int = 1) -> "KahlerModel":
        if int(k) < 1:
            raise ValueError(f"sphere level k must be a positive integer, got {k}")
        return cls(SPHERE, hbar=1.0 / k, k=int(k))

    @property
    def effective_hbar(self) -> float:
        return self.hbar if self.kind == PLANE else 1.0 / self.k

    @property
    def charts(self) -> tuple[int, ...]:
        return (0,) if self.kind == PLANE else (SOUTH, NORTH)

    @property
    def radius(self) -> float:
        """Radius of the sphere model read off the pinned metric."""
        if self.kind != SPHERE:
            raise DomainError("the plane has no radius")
        return float(np.sqrt(self.metric_scale))


@dataclass(frozen=True)
class ChartPoint:
    chart: int
    u: tuple[float, float]

    @classmethod
    def from_complex(cls, chart: int, z: complex) -> "ChartPoint":
        return cls(int(chart), (float(np.real(z)), float(np.imag(z))))

    @property
    def z(self) -> complex:
        return complex(self.u[0], self.u[1])


def _check(model: KahlerModel, p: ChartPoint) -> complex:
    if p.chart not in model.charts:
        raise DomainError(f"chart {p.chart} is not a chart of the {model.kind} model")
    z = p.z
    if not np.isfinite(z):
        raise DomainError(f"non-finite coordinates {p.u}")
    return z


def conformal_factor(model: KahlerModel, z):
    """``lam(z)`` with ``g = lam * I``; vectorized over ``z``.  Same formula in every chart."""
    if model.kind == PLANE:
        return model.metric_scale * 4.0 * np.ones_like(np.real(z))
    return model.metric_scale * 4.0 / (1.0 + np.abs(z) ** 2) ** 2


def metric_at(model: KahlerModel, p: ChartPoint) -> np.ndarray:
    z = _check(model, p)
    return float(conformal_factor(model, z)) * np.eye(2)


def volume_density(model: KahlerModel, p: ChartPoint) -> float:
    z = _check(model, p)
    return float(conformal_factor(model, z))


def chart_transition(model: KahlerModel, p: ChartPoint, target: int) -> ChartPoint:
    """Express ``p`` in chart ``target`` (sphere: ``z -> 1/z``)."""
    z = _check(model, p)
    if target not in model.charts:
        raise DomainError(f"chart {target} is not a chart of the {model.kind} model")
    if target == p.chart:
        return p
    if z == 0:
        raise SingularityError("z = 0 is the excluded point of the target chart")
    return ChartPoint.from_complex(target, 1.0 / z)


def transition_jacobian(p: ChartPoint) -> np.ndarray:
    """Real Jacobian of ``z -> 1/z`` at ``p``, as d(u')/d(u)."""
    d = -1.0 / p.z**2  # holomorphic derivative
    return np.array([[d.real, -d.imag], [d.imag, d.real]])


def natural_chart(model: KahlerModel, p: ChartPoint) -> ChartPoint:
    """Move a sphere point into the chart where ``|z| <= 1``."""
    z = _check(model, p)
    if model.kind == SPHERE and abs(z) > 1.0:
        return chart_transition(model, p, 1 - p.chart)
    return p


# -- sphere embedding -------------------------------------------------------

def to_unit_vector(chart, z):
    """Stereographic chart coordinates to points of the unit sphere in R^3."""
    chart = np.asarray(chart)
    z = np.asarray(z, dtype=complex)
    r2 = np.abs(z) ** 2
    x1 = 2 * z.real / (1 + r2)
    x2 = 2 * z.imag / (1 + r2)
    x3 = (r2 - 1) / (1 + r2)
    # chart 1: w = (X1 - i X2) / (1 + X3)
    x2 = np.where(chart == NORTH, -x2, x2)
    x3 = np.where(chart == NORTH, -x3, x3)
    return np.stack([x1, x2, x3], axis=-1)


def from_unit_vector(X, chart):
    X = np.asarray(X, dtype=float)
    chart = np.asarray(chart)
    x1, x2, x3 = X[..., 0], X[..., 1], X[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        z0 = (x1 + 1j * x2) / (1 - x3)
        z1 = (x1 - 1j * x2) / (1 + x3)
    return np.where(chart == NORTH, z1, z0)


def geodesic_distance(model: KahlerModel, p: ChartPoint, q: ChartPoint) -> float:
    if model.kind == PLANE:
        _check(model, p), _check(model, q)
        return float(np.sqrt(model.metric_scale) * 2.0 * abs(p.z - q.z))
    a = to_unit_vector(p.chart, _check(model, p))
    b = to_unit_vector(q.chart, _check(model, q))
    # atan2 form stays accurate for nearly equal and nearly antipodal points
    angle = np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b))
    return float(model.radius * angle)
