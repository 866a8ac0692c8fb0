"""Finite-D Feynman-Kac estimators, their D -> infinity extrapolation, and Kato diagnostics.

At diffusion constant ``D`` the estimators target the semigroup of
``S_D = D (rho - Bochner Laplacian) + f``, whose holomorphic part is the
Berezin-Toeplitz operator ``T_f``; as ``D`` grows the semigroup kernel tends to
that of ``exp(-t T_f)``.  ``rho`` is constant in both models, so the factor
``exp(-t D rho)`` is applied analytically and only ``f`` is sampled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .bergman import BasisSpec, QuadratureRule, plane_rule, sphere_rule
from .bundle import BundleData
from .errors import ExtrapolationError, UnsupportedModelError
from .geometry import PLANE, SPHERE, ChartPoint, geodesic_distance
from .magnetic import magnetic_oracle_plane
from .paths import (
    SeedSpec,
    TimeGrid,
    fk_log_weight_batch,
    forward_block,
    mc_mean,
    plane_bridge_block,
    semigroup_apply,
    transport_batch,
)
from .symbols import SymbolSpec

DEFAULT_LADDER = (4.0, 8.0, 16.0, 32.0)


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 10_000
    n_steps: int = 200
    seed: int = 20240607
    workers: int = 1
    key: tuple[int, ...] = ()


@dataclass
class Estimate:
    value: complex
    stderr: float
    n_paths: int
    n_steps: int
    D: float
    t: float
    frames: tuple | None = None
    rejected: int = 0
    invariant: float | None = None
    meta: dict = field(default_factory=dict)


def heat_kernel_plane(b: BundleData, D: float, t: float, x: ChartPoint, y: ChartPoint) -> float:
    d = geodesic_distance(b.model, x, y)
    return float(np.exp(-d * d / (4 * D * t)) / (4 * np.pi * D * t))


def _bridge_values(b: BundleData, f: SymbolSpec, D: float, zx: complex, zy: complex, grid: TimeGrid, rng, n):
    batch = plane_bridge_block(b.model, zx, zy, D, grid, rng, n)
    return np.exp(fk_log_weight_batch(b.model, f, batch)) * transport_batch(b, batch)


def finite_d_kernel(b: BundleData, f: SymbolSpec, D: float, t: float, x: ChartPoint, y: ChartPoint,
                    mc: MCConfig) -> Estimate:
    """Bridge estimate of the kernel coefficient ``exp(-t S_D)(x, y)`` on the plane."""
    if b.model.kind != PLANE:
        raise UnsupportedModelError("pointwise kernels need exact bridges (plane only); use finite_d_matrix")
    if not f.is_constant:
        f.check_model(b.model)
    grid = TimeGrid(t, mc.n_steps)
    res = mc_mean(partial(_bridge_values, b, f, D, x.z, y.z, grid), mc.n_paths, mc.seed, mc.key, mc.workers)
    rho = float(b.rho(0.0))
    pref = heat_kernel_plane(b, D, t, x, y) * np.exp(-t * D * rho - t * f.shift + b.phi(y.z))
    val = complex(pref * res.mean)
    inv = float(abs(val) ** 2 * np.exp(-b.phi(x.z) - b.phi(y.z)))
    return Estimate(val, float(pref * res.stderr), res.n, mc.n_steps, D, t, (x.chart, y.chart), res.rejected, inv,
                    dict(symbol=f.describe(), prefactor=float(pref)))


# -- matrix elements ------------------------------------------------------------

@dataclass
class MatrixEstimate:
    values: np.ndarray
    stderr: np.ndarray
    D: float
    t: float
    n_paths: int
    n_steps: int
    n_nodes: int
    meta: dict = field(default_factory=dict)

    def element(self, a: int, b: int) -> Estimate:
        return Estimate(complex(self.values[a, b]), float(self.stderr[a, b]), self.n_paths, self.n_steps, self.D,
                        self.t, None, 0, None, dict(self.meta, element=(a, b)))


def start_rule(basis: BasisSpec, n_nodes: tuple[int, int] = (10, 20), chart="natural") -> QuadratureRule:
    """Outer quadrature over start points of the forward paths."""
    if basis.model.kind == SPHERE:
        return sphere_rule(basis.bundle, n_nodes[0], n_nodes[1], chart)
    return plane_rule(basis.bundle, n_nodes[0], n_nodes[1], max_power=2 * basis.N + 2)


def finite_d_matrix(b: BundleData, f: SymbolSpec, D: float, t: float, basis: BasisSpec, mc: MCConfig,
                    n_nodes: tuple[int, int] = (10, 20), chart="natural") -> MatrixEstimate:
    """All matrix elements ``(eta_a, exp(-t S_D) eta_b)`` from forward paths.

    One set of paths per start node serves every ``(a, b)``; nodes use
    independent substreams keyed by node index (shared across ``D``).
    """
    if not f.is_constant:
        f.check_model(b.model)
    if basis.L is None:
        basis.orthonormalize()
    rule = start_rule(basis, n_nodes, chart)
    grid = TimeGrid(t, mc.n_steps)
    N = basis.N
    acc = np.zeros((N, N), dtype=complex)
    var = np.zeros((N, N))
    eta_nodes = basis.eta(rule.charts, rule.z)  # (N, nodes)
    wts = rule.weights * np.exp(-b.phi(rule.z))
    for i, (c, z) in enumerate(zip(rule.charts, rule.z)):
        x = ChartPoint.from_complex(int(c), z)
        res = semigroup_apply(b, f, D, t, basis.eta, x, mc.n_paths, grid,
                              SeedSpec(mc.seed, key=(*mc.key, i)), mc.workers)
        left = wts[i] * np.conj(eta_nodes[:, i])
        acc += np.outer(left, res.mean)
        var += np.outer(np.abs(left) ** 2, res.stderr**2)
    scale = np.exp(-t * D * float(b.rho(0.0)))
    return MatrixEstimate(acc * scale, np.sqrt(var) * scale, D, t, mc.n_paths, mc.n_steps, len(rule),
                          dict(symbol=f.describe(), chart=chart))


def finite_d_matrix_element(b: BundleData, f: SymbolSpec, D: float, t: float, a_idx: int, b_idx: int,
                            basis: BasisSpec, mc: MCConfig, n_nodes=(10, 20)) -> Estimate:
    return finite_d_matrix(b, f, D, t, basis, mc, n_nodes).element(a_idx, b_idx)


# -- D ladders and extrapolation ------------------------------------------------

@dataclass
class DLadder:
    """Values at increasing ``D`` (stderr 0 marks noise-free oracle values)."""

    D: list
    values: list
    stderr: list
    fit: tuple | None = None
    residual: float | None = None

    def __post_init__(self):
        if not (len(self.D) == len(self.values) == len(self.stderr)):
            raise ValueError("ladder columns differ in length")

    @classmethod
    def from_estimates(cls, estimates) -> "DLadder":
        return cls([e.D for e in estimates], [e.value for e in estimates], [e.stderr for e in estimates])


@dataclass
class Extrapolation:
    limit: complex
    stderr: float
    slope: complex
    residuals: np.ndarray
    max_residual: float
    chi2: float | None
    weighted: bool
    nonmonotone: bool


def dk_extrapolate(ladder: DLadder, target: complex | None = None) -> Extrapolation:
    """Least-squares fit ``a + b / D``, weighted by ``1/stderr^2`` when every point has noise.

    ``stderr`` of the limit is the propagated Monte Carlo error ``sqrt(Cov_aa)``;
    ``max_residual`` measures how well the two-parameter model fits.
    """
    D = np.asarray(ladder.D, dtype=float)
    v = np.asarray(ladder.values, dtype=complex)
    s = np.asarray(ladder.stderr, dtype=float)
    if len(D) < 3:
        raise ExtrapolationError("need at least three D values")
    if np.any(np.diff(D) <= 0):
        raise ExtrapolationError("D values must be strictly increasing")
    if not np.all(np.isfinite(v)) or not np.all(np.isfinite(s)):
        raise ExtrapolationError("non-finite ladder entries")
    weighted = bool(np.all(s > 0))
    w = 1.0 / s**2 if weighted else np.ones_like(D)
    A = np.stack([np.ones_like(D), 1.0 / D], axis=1)
    AtWA = A.T @ (w[:, None] * A)
    if np.linalg.cond(AtWA) > 1e12:
        raise ExtrapolationError("ill-conditioned a + b/D fit")
    cov = np.linalg.inv(AtWA)
    coef = cov @ (A.T @ (w * v))
    a, bslope = coef
    res = v - A @ coef
    chi2 = float(np.sum(w * np.abs(res) ** 2)) if weighted else None
    stderr = float(np.sqrt(cov[0, 0])) if weighted else 0.0
    d = np.diff(v.real)
    joint = np.sqrt(s[1:] ** 2 + s[:-1] ** 2)
    big = np.abs(d) > 3 * joint
    nonmono = bool(np.any((d[1:] * d[:-1] < 0) & big[1:] & big[:-1]))
    ladder.fit = (complex(a), complex(bslope))
    ladder.residual = float(np.max(np.abs(res)))
    return Extrapolation(complex(a), stderr, complex(bslope), res, float(np.max(np.abs(res))), chi2, weighted,
                         nonmono)


def oracle_ladder(b: BundleData, f: SymbolSpec | None, t: float, x: ChartPoint, y: ChartPoint | None = None,
                  Ds=DEFAULT_LADDER, **oracle_kw) -> DLadder:
    y = y or x
    vals = [magnetic_oracle_plane(b, D, t, x, y, f, **oracle_kw).value for D in Ds]
    return DLadder(list(Ds), vals, [0.0] * len(Ds))


def mc_ladder(b: BundleData, f: SymbolSpec, t: float, x: ChartPoint, y: ChartPoint | None, mc: MCConfig,
              Ds=DEFAULT_LADDER) -> tuple[DLadder, list[Estimate]]:
    y = y or x
    ests = [finite_d_kernel(b, f, D, t, x, y, mc) for D in Ds]
    return DLadder.from_estimates(ests), ests


@dataclass
class MonotonicityReport:
    passed: bool
    strict: bool
    violations: list


def monotonicity_check(ladder: DLadder, n_sigma: float = 3.0) -> MonotonicityReport:
    """Diagonal kernels must not increase with ``D``.

    Noise-free ladders must decrease strictly; noisy ones may rise by at most
    ``n_sigma`` joint standard errors between neighbours.
    """
    v = np.real(np.asarray(ladder.values, dtype=complex))
    s = np.asarray(ladder.stderr, dtype=float)
    strict = bool(np.all(s == 0))
    bad = []
    for i in range(len(v) - 1):
        rise = v[i + 1] - v[i]
        allowed = 0.0 if strict else n_sigma * np.hypot(s[i], s[i + 1])
        if rise > allowed or (strict and rise >= 0):
            bad.append((ladder.D[i], ladder.D[i + 1], float(rise)))
    return MonotonicityReport(not bad, strict, bad)


# -- Kato class diagnostics -----------------------------------------------------

def _integral_values(model, q: SymbolSpec, x: ChartPoint, D, grid, sign, rng, n):
    batch = forward_block(model, x, D, grid, rng, n)
    if sign == 0:  # int |q| without the constant
        vals = np.abs(q(model, batch.charts, batch.z))
        return grid.dt * (vals[:, 1:-1].sum(axis=1) + 0.5 * (vals[:, 0] + vals[:, -1]))
    return np.exp(-fk_log_weight_batch(model, q, batch))


@dataclass
class KatoEstimate:
    kappa: float
    stderr: float
    argmax: ChartPoint
    per_probe: list


def kato_probes(model, n: int = 5) -> list[ChartPoint]:
    """Finite stand-in for the sup over x: a grid of radius ``3 sqrt(hbar)`` (plane) or a sphere grid."""
    if model.kind == PLANE:
        r = 3 * np.sqrt(model.hbar)
        xs = np.linspace(-r, r, n)
        return [ChartPoint(0, (float(a), float(c))) for a in xs for c in xs]
    rule = sphere_rule(BundleData(model), n, 2 * n)
    return rule.points()


def kato_kappa(model, q: SymbolSpec, D: float, t: float, probes: list[ChartPoint], mc: MCConfig) -> KatoEstimate:
    """Probe maximum of ``E_x int_0^t |q|(B_s) ds`` (trapezoid in ``s``)."""
    per = []
    for i, x in enumerate(probes):
        if q.is_constant:
            per.append((abs(q.shift) * t, 0.0))
            continue
        grid = TimeGrid(t, mc.n_steps)
        res = mc_mean(partial(_integral_values, model, q, x, D, grid, 0), mc.n_paths, mc.seed, (*mc.key, i),
                      mc.workers)
        per.append((float(np.real(res.mean)), float(res.stderr)))
    j = int(np.argmax([p[0] for p in per]))
    return KatoEstimate(per[j][0], per[j][1], probes[j], per)


@dataclass
class KhasminskiiResult:
    lhs: float
    lhs_stderr: float
    bound: float
    kappa: float
    kappa_stderr: float
    hypothesis_ok: bool
    passed: bool | None


def khasminskii_check(model, q: SymbolSpec, D: float, t: float, x: ChartPoint, mc: MCConfig,
                      probes: list[ChartPoint] | None = None) -> KhasminskiiResult:
    """Compare ``E_x exp(int_0^t q)`` with ``1 / (1 - kappa)`` for ``q >= 0``.

    ``kappa >= 1`` violates the lemma's hypothesis; this is reported through
    ``hypothesis_ok`` and ``passed = None`` rather than as a failure.
    """
    kap = kato_kappa(model, q, D, t, probes or [x], mc)
    if q.is_constant:
        lhs, err = float(np.exp(q.shift * t)), 0.0
    else:
        grid = TimeGrid(t, mc.n_steps)
        res = mc_mean(partial(_integral_values, model, q, x, D, grid, 1), mc.n_paths, mc.seed, (*mc.key, 10_000),
                      mc.workers)
        lhs, err = float(np.real(res.mean)) * float(np.exp(q.shift * t)), float(res.stderr) * float(np.exp(q.shift * t))
    if kap.kappa >= 1:
        return KhasminskiiResult(lhs, err, np.inf, kap.kappa, kap.stderr, False, None)
    bound = 1.0 / (1.0 - kap.kappa)
    return KhasminskiiResult(lhs, err, bound, kap.kappa, kap.stderr, True, bool(lhs <= bound + 3 * err))
