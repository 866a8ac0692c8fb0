"""Deterministic quadrature oracle for the Bergman space of holomorphic sections.

Everything here is exact linear algebra on a finite basis of monomials
``z^0 .. z^(N-1)`` (chart-0 frame), integrated with product quadrature:

* plane: Gauss-Legendre in ``s = |z|^2`` on ``[0, R^2]`` times a uniform
  angular rule; the Gaussian tail beyond ``R`` is bounded analytically.
* sphere: Gauss-Legendre in ``cos(polar angle)`` times a uniform azimuthal
  rule.  All integrands are polynomials in the embedding coordinates, so the
  rule is exact once it has enough nodes.

Kernel coefficients follow one convention throughout the package:
``K(x, y) = sum_l eta_l(x) conj(eta_l(y))`` in the frames of the charts of
``x`` and ``y``, acting by ``(K psi)(x) = int K(x, y) psi(y) exp(-phi(y)) dm(y)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_legendre, gammainc, gammaincc, gammaln

from .bundle import BundleData
from .errors import PrecisionError, UnsupportedModelError
from .geometry import NORTH, PLANE, SOUTH, SPHERE, ChartPoint, conformal_factor, from_unit_vector, to_unit_vector

TAIL_TOL = 1e-13


@dataclass
class QuadratureRule:
    """Nodes ``(chart, z)`` with weights for ``int F dm``."""

    charts: np.ndarray
    z: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.z.size

    def points(self) -> list[ChartPoint]:
        return [ChartPoint.from_complex(c, z) for c, z in zip(self.charts, self.z)]


def default_cutoff(hbar: float, max_power: int) -> float:
    """Smallest radius, at least ``8 sqrt(hbar)``, whose Gaussian tail is below ``TAIL_TOL``."""
    s = 64.0
    while gammaincc(max_power + 1, s) > TAIL_TOL:
        s *= 1.1
    return float(np.sqrt(hbar * s))


def plane_rule(b: BundleData, n_radial: int = 160, n_angular: int = 72, cutoff_R: float | None = None,
               max_power: int = 40) -> QuadratureRule:
    hbar = b.model.hbar
    R = cutoff_R if cutoff_R is not None else default_cutoff(hbar, max_power)
    xs, ws = np.polynomial.legendre.leggauss(n_radial)
    # Gauss-Legendre in r = |z| (not |z|^2) keeps radial symbols like |z| smooth at the origin
    r = 0.5 * R * (xs + 1.0)
    ws = 0.5 * R * ws
    ang = 2 * np.pi * np.arange(n_angular) / n_angular
    z = (r[:, None] * np.exp(1j * ang[None, :])).ravel()
    # d^2u = r dr dang
    w = ((ws * r)[:, None] * (2 * np.pi / n_angular) * np.ones((1, n_angular))).ravel()
    w = w * conformal_factor(b.model, z)
    tail = float(gammaincc(max_power + 1, R**2 / hbar))
    meta = dict(rule="gauss-legendre(|z|) x uniform", n_radial=n_radial, n_angular=n_angular,
                cutoff_R=R, tail=tail, max_power=max_power)
    return QuadratureRule(np.zeros(z.size, dtype=np.int8), z, w, meta)


def sphere_rule(b: BundleData, n_polar: int = 24, n_azimuth: int = 48, chart: int | str = "natural",
                offset: float = 0.0) -> QuadratureRule:
    """Product rule on the sphere; nodes in ``chart`` (0, 1, or the one with ``|z| <= 1``)."""
    x3, wg = np.polynomial.legendre.leggauss(n_polar)
    az = 2 * np.pi * (np.arange(n_azimuth) + offset) / n_azimuth
    st = np.sqrt(1 - x3**2)
    X = np.stack(np.broadcast_arrays(st[:, None] * np.cos(az), st[:, None] * np.sin(az), x3[:, None]), axis=-1)
    X = X.reshape(-1, 3)
    if chart == "natural":
        charts = np.where(X[:, 2] > 0, NORTH, SOUTH).astype(np.int8)
    else:
        charts = np.full(len(X), int(chart), dtype=np.int8)
    z = from_unit_vector(X, charts)
    r = b.model.radius
    w = (wg[:, None] * (2 * np.pi / n_azimuth) * np.ones((1, n_azimuth))).ravel() * r**2
    meta = dict(rule="gauss-legendre(cos) x uniform", n_polar=n_polar, n_azimuth=n_azimuth, chart=chart, tail=0.0)
    return QuadratureRule(charts, z, w, meta)


def volume(b: BundleData, rule: QuadratureRule | None = None) -> float:
    if b.model.kind != SPHERE:
        raise UnsupportedModelError("the plane has infinite volume")
    rule = rule or sphere_rule(b)
    return float(rule.weights.sum())


# -- basis -------------------------------------------------------------------------

@dataclass
class GramMatrix:
    G: np.ndarray
    meta: dict


@dataclass
class BasisSpec:
    """Monomial basis ``z^0 .. z^(N-1)`` in the chart-0 frame, plus quadrature settings."""

    bundle: BundleData
    N: int | None = None
    n_radial: int | None = None
    n_angular: int | None = None
    cutoff_R: float | None = None
    n_polar: int | None = None
    n_azimuth: int | None = None
    L: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        m = self.bundle.model
        if m.kind == SPHERE:
            if self.N is None:
                self.N = m.k + 1
            if self.N > m.k + 1:
                raise ValueError(f"the sphere at level k={m.k} has only k+1 = {m.k + 1} holomorphic sections")
        elif self.N is None:
            self.N = 16
        if self.N < 1:
            raise ValueError("N must be positive")

    @property
    def model(self):
        return self.bundle.model

    def rule(self, extra_power: int = 2, chart="natural") -> QuadratureRule:
        if self.model.kind == PLANE:
            N = self.N
            n_rad = self.n_radial or max(160, 6 * N + 40)
            n_ang = self.n_angular or (2 * N + 2 * extra_power + 8)
            return plane_rule(self.bundle, n_rad, n_ang, self.cutoff_R, max_power=2 * (N - 1) + extra_power)
        k = self.model.k
        n_pol = self.n_polar or (k + extra_power + 8)
        n_az = self.n_azimuth or (2 * k + 2 * extra_power + 8)
        return sphere_rule(self.bundle, n_pol, n_az, chart)

    def monomials(self, charts, z) -> np.ndarray:
        """Coefficients of ``z^n`` (n < N) in the frame of each node's chart; shape (N, npts)."""
        z = np.asarray(z, dtype=complex)
        charts = np.asarray(charts)
        n = np.arange(self.N).reshape((-1,) + (1,) * z.ndim)
        if self.model.kind == PLANE:
            return z[None] ** n
        k = self.model.k
        # coefficient in the north frame is c / tau = z^(n-k) = w^(k-n)
        return np.where(charts[None] == NORTH, z[None] ** (k - n), z[None] ** n)

    def eta(self, charts, z) -> np.ndarray:
        """Orthonormal sections ``eta_a`` at the nodes; shape (N, npts)."""
        if self.L is None:
            self.orthonormalize()
        mono = self.monomials(charts, z)
        return np.tensordot(np.conj(self.L), mono, axes=(1, 0))

    def orthonormalize(self) -> "BasisSpec":
        self.L = orthonormalize(gram_matrix(self))
        return self

    def eta_at(self, p: ChartPoint) -> np.ndarray:
        return self.eta(np.array([p.chart]), np.array([p.z]))[:, 0]


def _h_products(basis: BasisSpec, rule: QuadratureRule, f=None) -> np.ndarray:
    """``int conj(e_m) f e_n exp(-phi) dm`` for the monomials."""
    mono = basis.monomials(rule.charts, rule.z)
    w = rule.weights * np.exp(-basis.bundle.phi(rule.z))
    if f is not None:
        w = w * f
    return (np.conj(mono) * w) @ mono.T


def _check_tail(rule: QuadratureRule, tol: float):
    if rule.meta.get("tail", 0.0) > tol:
        raise PrecisionError(f"quadrature tail bound {rule.meta['tail']:.3g} exceeds {tol:.1g}")


def gram_matrix(basis: BasisSpec, tol: float = 1e-12) -> GramMatrix:
    rule = basis.rule(extra_power=0)
    _check_tail(rule, tol)
    return GramMatrix(_h_products(basis, rule), dict(rule.meta))


def orthonormalize(G: GramMatrix | np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L G L^H = I`` (Cholesky; raises LinAlgError if indefinite)."""
    G = G.G if isinstance(G, GramMatrix) else np.asarray(G)
    C = np.linalg.cholesky(G)
    Linv = np.linalg.solve(C, np.eye(len(G)))
    return np.tril(Linv)


# -- kernels -----------------------------------------------------------------------

@dataclass
class KernelValue:
    """A kernel coefficient with its frames and the frame-independent ``|K|^2 e^-phi(x) e^-phi(y)``."""

    value: complex
    chart_x: int
    chart_y: int
    invariant: float
    tail: float = 0.0


def _invariant(b: BundleData, x: ChartPoint, y: ChartPoint, value: complex) -> float:
    return float(abs(value) ** 2 * np.exp(-b.phi(x.z) - b.phi(y.z)))


def kernel_series(basis: BasisSpec, x: ChartPoint, y: ChartPoint, tol: float = 1e-8) -> KernelValue:
    ex, ey = basis.eta_at(x), basis.eta_at(y)
    val = complex(np.sum(ex * np.conj(ey)))
    tail = 0.0
    m = basis.model
    if m.kind == PLANE:
        # |eta_n(x) eta_n(y)| = rho^n / (n! * 4 pi hbar * scale), rho = |x||y|/hbar
        rho = abs(x.z) * abs(y.z) / m.hbar
        pref = 1.0 / (4 * np.pi * m.hbar * m.metric_scale)
        tail = pref * float(np.exp(rho) * gammainc(basis.N, rho)) if rho > 0 else 0.0
        tail *= float(np.exp(-0.5 * (basis.bundle.phi(x.z) + basis.bundle.phi(y.z))))
        if tail > tol:
            raise PrecisionError(f"kernel series truncation tail {tail:.3g} exceeds {tol:.1g}; raise N")
    return KernelValue(val, x.chart, y.chart, _invariant(basis.bundle, x, y, val), tail)


def reproducing_residual(basis: BasisSpec, psi_index: int, probes: list[ChartPoint]) -> float:
    """``max |psi(x) - int K(x, y) psi(y) e^-phi(y) dm(y)|`` over probes, ``psi = eta_j``."""
    rule = basis.rule(extra_power=0)
    ey = basis.eta(rule.charts, rule.z)
    w = rule.weights * np.exp(-basis.bundle.phi(rule.z))
    coeffs = (np.conj(ey) * w) @ ey[psi_index]  # (eta_l, psi) by quadrature
    worst = 0.0
    for p in probes:
        ex = basis.eta_at(p)
        worst = max(worst, abs(ex[psi_index] - np.sum(ex * coeffs)))
    return float(worst)


@dataclass
class ToeplitzMatrix:
    M: np.ndarray
    symbol: str

    def eigh(self):
        return np.linalg.eigh(0.5 * (self.M + self.M.conj().T))


def toeplitz_matrix(f, basis: BasisSpec, tol: float = 1e-12, extra_power: int = 4) -> ToeplitzMatrix:
    """Matrix of ``t_f`` in the orthonormal basis.

    ``f`` is a ``SymbolSpec`` or any callable ``f(charts, z)`` of the nodes.
    """
    if basis.L is None:
        basis.orthonormalize()
    rule = basis.rule(extra_power=extra_power)
    _check_tail(rule, tol)
    if hasattr(f, "variable"):
        vals, name = f(basis.model, rule.charts, rule.z), f.describe()
    else:
        vals, name = f(rule.charts, rule.z), getattr(f, "__name__", "callable")
    F = _h_products(basis, rule, vals)
    M = basis.L @ F @ basis.L.conj().T
    return ToeplitzMatrix(M, name)


def semigroup_matrix(T: ToeplitzMatrix, t: float) -> np.ndarray:
    """``exp(-t M)`` for the Hermitian Toeplitz matrix, via eigendecomposition."""
    lam, V = T.eigh()
    return (V * np.exp(-t * lam)) @ V.conj().T


def toeplitz_semigroup_kernel(f, basis: BasisSpec, t: float, x: ChartPoint, y: ChartPoint) -> KernelValue:
    T = f if isinstance(f, ToeplitzMatrix) else toeplitz_matrix(f, basis)
    E = semigroup_matrix(T, t)
    val = complex(basis.eta_at(x) @ E @ np.conj(basis.eta_at(y)))
    return KernelValue(val, x.chart, y.chart, _invariant(basis.bundle, x, y, val))


# -- sphere heat kernel --------------------------------------------------------

def sphere_heat_series(b: BundleData, D: float, t: float, x: ChartPoint, y: ChartPoint, tol: float = 1e-13,
                       l_cap: int = 20000) -> float:
    """Scalar heat kernel of ``D * Laplacian`` on the model sphere (density w.r.t. ``dm``)."""
    if b.model.kind != SPHERE:
        raise UnsupportedModelError("sphere_heat_series needs the sphere model")
    r = b.model.radius
    c = D * t / r**2
    # sum_{l > L} (2l+1) e^{-c l(l+1)} <= e^{-c L(L+1)} / c once the summand decreases
    L = int(np.ceil(0.5 * (np.sqrt(2.0 / c) - 1))) + 1
    while np.exp(-c * L * (L + 1)) / (c * 4 * np.pi * r**2) > tol:
        L += max(1, L // 4)
        if L > l_cap:
            raise PrecisionError(f"heat series needs more than {l_cap} terms at D t / r^2 = {c:.3g}")
    a = to_unit_vector(x.chart, x.z)
    bb = to_unit_vector(y.chart, y.z)
    cosg = float(np.clip(np.dot(a, bb), -1.0, 1.0))
    ls = np.arange(L + 1)
    terms = (2 * ls + 1) * np.exp(-c * ls * (ls + 1)) * eval_legendre(ls, cosg)
    return float(terms.sum() / (4 * np.pi * r**2))


def plane_bergman_norm(model, n: int) -> float:
    """Analytic ``int |z^n|^2 e^-phi dm`` on the plane (for tests and bounds)."""
    return float(np.exp(np.log(4 * np.pi * model.metric_scale) + (n + 1) * np.log(model.hbar) + gammaln(n + 1)))
