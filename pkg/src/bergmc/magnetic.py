"""Finite-difference reference for the finite-D Schrödinger semigroup on the plane.

Independent of the path code: the operator ``D (rho - Bochner Laplacian) + f``
is discretized on a square lattice in Riemannian coordinates ``X = 2 u`` with
Peierls link phases, Dirichlet walls and a fourth-order stencil along each
lattice axis.  Along a lattice line the link phases are the exact line
integrals of the (linear) symmetric-gauge potential, so the covariant stencil
is unitarily equivalent to the free one and keeps its ``h^4`` accuracy.

The heat semigroup is applied to a lattice delta with a Chebyshev expansion
(coefficients ``I_k``), then the lattice is refined and the ``h^4`` error is
Richardson-eliminated until two successive extrapolants agree.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import ive

from .bundle import BundleData
from .errors import DomainError, PrecisionError, UnsupportedModelError
from .geometry import PLANE, ChartPoint
from .symbols import SymbolSpec

# fourth-order second-difference weights for offsets 1 and 2; centre is -30/12
_STENCIL = ((1, 16.0 / 12.0), (2, -1.0 / 12.0))
_CENTRE = 30.0 / 12.0
_SYMBOL_MAX = 64.0 / 12.0  # max of the 1-d stencil symbol, times 1/h^2


@dataclass
class OracleValue:
    value: complex
    chart_x: int
    chart_y: int
    invariant: float
    error: float
    levels: list = field(default_factory=list)


@dataclass
class Lattice:
    h: float
    n: int  # nodes at X = h * (-n .. n) per axis
    H: sp.csr_matrix
    lo: float
    hi: float

    def index(self, X) -> int:
        i = np.asarray(X) / self.h
        ii = np.rint(i).astype(int)
        if np.any(np.abs(i - ii) > 1e-9) or np.any(np.abs(ii) > self.n):
            raise DomainError(f"point X={tuple(X)} is not a node of the lattice with spacing {self.h}")
        m = 2 * self.n + 1
        return int((ii[0] + self.n) * m + (ii[1] + self.n))


def build_lattice(b: BundleData, D: float, h: float, half_width: float, f: SymbolSpec | None = None) -> Lattice:
    m_scale = np.sqrt(b.model.metric_scale)
    n = int(round(half_width / h))
    xs = h * np.arange(-n, n + 1)
    m = xs.size
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    idx = np.arange(m * m).reshape(m, m)
    # A = Im(theta) = c (X1 dX2 - X2 dX1) in X = 2 sqrt(scale) u
    c = -1.0 / (4.0 * b.model.hbar * b.model.metric_scale)
    rows, cols, vals = [], [], []
    for s, wgt in _STENCIL:
        for axis in (0, 1):
            if axis == 0:
                a, bb = idx[:-s, :].ravel(), idx[s:, :].ravel()
                ph = np.exp(1j * (-c) * X2[:-s, :].ravel() * s * h)
            else:
                a, bb = idx[:, :-s].ravel(), idx[:, s:].ravel()
                ph = np.exp(1j * c * X1[:, :-s].ravel() * s * h)
            rows += [a, bb]
            cols += [bb, a]
            vals += [wgt * ph, wgt * np.conj(ph)]
    hop = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m * m, m * m))
    u = (X1 + 1j * X2).ravel() / (2.0 * m_scale)
    rho = float(b.rho(0.0))
    pot = D * rho * np.ones(m * m)
    if f is not None:
        f.check_model(b.model)
        pot = pot + f(b.model, np.zeros(m * m, dtype=np.int8), u)
    diag = D * 2 * _CENTRE / h**2 + pot
    H = (sp.diags(diag) - (D / h**2) * hop).tocsr()
    # the covariant Laplacian is a sum of line operators, each unitarily equivalent
    # to the free stencil, so 0 <= -Lap_h <= 2 * _SYMBOL_MAX / h^2
    lo = float(pot.min())
    hi = float(pot.max() + D * 2 * _SYMBOL_MAX / h**2)
    return Lattice(h, n, H, lo, hi)


def heat_apply(lat: Lattice, v: np.ndarray, t: float, tol: float = 1e-16) -> np.ndarray:
    """``exp(-t H) v`` by a Chebyshev expansion on ``[lo, hi]``."""
    c = 0.5 * (lat.hi + lat.lo)
    r = 0.5 * (lat.hi - lat.lo)
    tr = t * r
    # exp(-t x) = exp(-t lo) * sum_k (2 - d_k0) (-1)^k ive(k, t r) T_k(y),  x = c + r y
    A = lat.H
    t0 = v
    t1 = (A @ v - c * v) / r
    out = ive(0, tr) * t0 - 2 * ive(1, tr) * t1
    k = 1
    i0 = ive(0, tr)
    while True:
        k += 1
        t2 = 2 * (A @ t1 - c * t1) / r - t0
        coef = ive(k, tr)
        out += (2 * coef if k % 2 == 0 else -2 * coef) * t2
        t0, t1 = t1, t2
        if k > 5 and coef < tol * i0:
            break
    return np.exp(-t * lat.lo) * out


def magnetic_oracle_plane(b: BundleData, D: float, t: float, x: ChartPoint, y: ChartPoint,
                          f: SymbolSpec | None = None, grid_L: float | None = None, grid_n: int | None = None,
                          tol: float = 1e-4, max_levels: int = 5) -> OracleValue:
    """Kernel coefficient of ``exp(-t S)``, ``S = D (rho - Bochner) + f``, on the plane.

    Same frame convention as :func:`bergmc.bergman.kernel_series`.  ``x`` and
    ``y`` must be nodes of the coarsest lattice: ``2 u`` a multiple of
    ``grid_L / grid_n`` (default spacing ``0.4 sqrt(hbar)``).
    """
    if b.model.kind != PLANE:
        raise UnsupportedModelError("the magnetic lattice oracle is for the plane")
    s = np.sqrt(b.model.hbar * b.model.metric_scale)
    L = grid_L if grid_L is not None else 13.2 * s
    n0 = grid_n if grid_n is not None else int(round(L / (0.4 * s)))
    h = L / n0
    Xx = 2 * np.sqrt(b.model.metric_scale) * np.array(x.u)
    Xy = 2 * np.sqrt(b.model.metric_scale) * np.array(y.u)
    raw, extrap = [], []
    err = np.inf
    for level in range(max_levels):
        lat = build_lattice(b, D, h, L, f)
        v = np.zeros(lat.H.shape[0], dtype=complex)
        v[lat.index(Xy)] = 1.0
        w = heat_apply(lat, v, t)
        raw.append(w[lat.index(Xx)] / h**2)
        if len(raw) >= 2:
            extrap.append((16 * raw[-1] - raw[-2]) / 15)
        if len(extrap) >= 2:
            err = abs(extrap[-1] - extrap[-2])
            if err <= tol * max(abs(extrap[-1]), 1e-10):
                break
        h /= 2
    else:
        raise PrecisionError(f"lattice refinement did not converge (last change {err:.3g})")
    val = complex(extrap[-1] * np.exp(0.5 * (b.phi(x.z) + b.phi(y.z))))
    inv = float(abs(val) ** 2 * np.exp(-b.phi(x.z) - b.phi(y.z)))
    return OracleValue(val, x.chart, y.chart, inv, float(err), [complex(r) for r in raw])


def mehler_diagonal(b: BundleData, D: float, t: float) -> float:
    """Closed form ``exp(-t S)(x, x) exp(-phi(x))`` for ``f = 0`` (Landau levels), for cross-checks."""
    B = -float(b.rho(0.0))
    return B / (2 * np.pi) / (-np.expm1(-2 * D * B * t))
