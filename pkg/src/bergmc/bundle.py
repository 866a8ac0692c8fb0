"""The prequantum Hermitian holomorphic line bundle over each model.

Sections are written in the holomorphic frame ``s`` of each chart with
``h(s, s) = exp(-phi)``:

* plane: ``phi = |z|^2 / hbar``
* sphere, either chart: ``phi = k log(1 + |z|^2)``, frames related by
  ``s_north = z**k * s_south`` (the line bundle O(k)).

The Chern connection has coefficient ``theta = -d_z phi dz``.  Its real part
is ``-dphi/2``, which is what makes the modulus of parallel transport exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError
from .geometry import PLANE, SPHERE, ChartPoint, KahlerModel, _check, conformal_factor


@dataclass(frozen=True)
class ConnectionCoefficient:
    """``theta = theta_z dz`` at a point."""

    theta_z: complex

    def real_covector(self) -> np.ndarray:
        """Values ``(theta(d/du1), theta(d/du2))``."""
        return np.array([self.theta_z, 1j * self.theta_z])

    @property
    def alpha(self) -> np.ndarray:
        """The connection one-form ``alpha = -i theta`` on the coordinate basis."""
        return -1j * self.real_covector()


@dataclass(frozen=True)
class BundleData:
    model: KahlerModel

    @property
    def hbar(self) -> float:
        return self.model.effective_hbar

    # vectorized kernels, shared with the path code --------------------------

    def phi(self, z):
        if self.model.kind == PLANE:
            return np.abs(z) ** 2 / self.model.hbar
        return self.model.k * np.log1p(np.abs(z) ** 2)

    def dphi_z(self, z):
        """``d phi / d z``."""
        if self.model.kind == PLANE:
            return np.conj(z) / self.model.hbar
        return self.model.k * np.conj(z) / (1.0 + np.abs(z) ** 2)

    def ddbar_phi(self, z):
        """``d^2 phi / dz dzbar``, analytic."""
        if self.model.kind == PLANE:
            return np.ones_like(np.real(z)) / self.model.hbar
        return self.model.k / (1.0 + np.abs(z) ** 2) ** 2

    def theta_z(self, z):
        return -self.dphi_z(z)

    def curvature_density(self, z):
        """``d(alpha)(d/du1, d/du2) = -2 d_z d_zbar phi``; ``d alpha`` is real."""
        return -2.0 * self.ddbar_phi(z)

    def rho(self, z):
        # R(Zbar, Z) = -i dtheta(E1, E2) with E the g-orthonormal frame
        return -2.0 * self.ddbar_phi(z) / conformal_factor(self.model, z)

    def tau(self, z):
        """Frame transition leaving a chart at coordinate ``z``: ``s_other = tau * s_this``."""
        return z ** self.model.k


def weight_at(b: BundleData, p: ChartPoint) -> float:
    z = _check(b.model, p)
    return float(np.exp(-b.phi(z)))


def connection_at(b: BundleData, p: ChartPoint) -> ConnectionCoefficient:
    z = _check(b.model, p)
    return ConnectionCoefficient(complex(b.theta_z(z)))


def rho_at(b: BundleData, p: ChartPoint) -> float:
    z = _check(b.model, p)
    return float(b.rho(z))


def frame_transition(b: BundleData, p: ChartPoint, target: int) -> complex:
    """``tau`` with ``s_target(p) = tau * s_p.chart(p)``.

    Coefficients transform the other way, ``c_target = c / tau``, and the
    weights satisfy ``exp(-phi_target(p')) = |tau|^2 exp(-phi(p))``.
    """
    z = _check(b.model, p)
    if target not in b.model.charts:
        raise DomainError(f"chart {target} is not a chart of the {b.model.kind} model")
    if target == p.chart:
        return 1.0 + 0j
    if z == 0:
        raise SingularityError("frame transition at the excluded point")
    return complex(b.tau(z))


def prequantum_residual(b: BundleData, p: ChartPoint, n_frames: int = 4) -> float:
    """``max |d alpha(X, Y) - omega(X, Y) / hbar|`` over g-orthonormal frame pairs.

    ``omega = g(., J .)/2`` with ``J d/du1 = d/du2``.  Zero iff the metric is
    pinned to the bundle curvature.
    """
    z = _check(b.model, p)
    lam = float(conformal_factor(b.model, z))
    F = float(b.curvature_density(z)) * np.array([[0.0, 1.0], [-1.0, 0.0]])
    g = lam * np.eye(2)
    Jm = np.array([[0.0, -1.0], [1.0, 0.0]])  # columns: J e1 = e2, J e2 = -e1
    omega = 0.5 * g @ Jm
    worst = 0.0
    for angle in np.linspace(0.0, np.pi, n_frames, endpoint=False):
        E1 = np.array([np.cos(angle), np.sin(angle)]) / np.sqrt(lam)
        E2 = Jm @ E1
        for X, Y in ((E1, E2), (E2, E1)):
            worst = max(worst, abs(X @ F @ Y - (X @ omega @ Y) / b.hbar))
    return worst
