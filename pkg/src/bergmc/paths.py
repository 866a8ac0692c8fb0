"""Brownian paths, stochastic parallel transport and Feynman-Kac weights.

Conventions
-----------
"Diffusion constant D" means generator ``D * Laplace-Beltrami``: along each
g-orthonormal direction a step of length ``dt`` has variance ``2 D dt``, and the
plane heat kernel is ``(4 pi D t)^-1 exp(-d^2 / (4 D t))`` with ``d`` the
Riemannian distance.

Paths are generated in blocks of ``BLOCK_SIZE`` consecutive path indices.
Block ``j`` draws from its own ``SeedSequence(seed, spawn_key=(*key, j))``
and path ``i`` of a block consumes the ``i``-th slab of normals, so a path is
a pure function of ``(seed, key, index)``.  Per-block sums are combined by a
fixed pairwise tree, which makes every estimate bitwise independent of the
number of worker processes.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .bundle import BundleData
from .errors import SamplerError, UnsupportedModelError
from .geometry import (
    PLANE,
    SPHERE,
    SWITCH_RADIUS,
    ChartPoint,
    KahlerModel,
    from_unit_vector,
    to_unit_vector,
)
from .symbols import SymbolSpec

BLOCK_SIZE = 2048
MAX_REJECTION_RATE = 0.01


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


@dataclass(frozen=True)
class SeedSpec:
    seed: int
    index: int = 0
    key: tuple[int, ...] = ()

    def block_rng(self, block: int) -> np.random.Generator:
        return block_rng(self.seed, self.key, block)


def block_rng(seed: int, key: Sequence[int], block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=(*map(int, key), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class PathBatch:
    """Node coordinates of a batch of paths, each node in its own chart."""

    charts: np.ndarray  # (n, n_steps + 1) int8
    z: np.ndarray  # (n, n_steps + 1) complex
    grid: TimeGrid

    def __len__(self):
        return self.z.shape[0]


@dataclass
class PathRecord:
    """One discretized path (debug and test use; estimators stream batches)."""

    model: KahlerModel
    grid: TimeGrid
    charts: np.ndarray
    z: np.ndarray
    crossings: list = field(default_factory=list)

    @classmethod
    def from_batch(cls, model: KahlerModel, batch: PathBatch, row: int = 0) -> "PathRecord":
        charts, z = batch.charts[row], batch.z[row]
        crossings = [
            (i, int(charts[i - 1]), int(charts[i])) for i in range(1, len(charts)) if charts[i] != charts[i - 1]
        ]
        return cls(model, batch.grid, charts.copy(), z.copy(), crossings)

    @classmethod
    def polyline(cls, model: KahlerModel, points: Sequence[ChartPoint], t_end: float = 1.0) -> "PathRecord":
        """Deterministic path through the given nodes (for tests)."""
        charts = np.array([p.chart for p in points], dtype=np.int8)
        z = np.array([p.z for p in points], dtype=complex)
        rec = cls(model, TimeGrid(t_end, len(points) - 1), charts, z)
        rec.crossings = cls.from_batch(model, rec.as_batch()).crossings
        return rec

    def as_batch(self) -> PathBatch:
        return PathBatch(self.charts[None, :], self.z[None, :], self.grid)

    @property
    def points(self) -> list[ChartPoint]:
        return [ChartPoint.from_complex(c, z) for c, z in zip(self.charts, self.z)]

    def trace(self, bundle: BundleData, q: SymbolSpec | None = None):
        """Cumulative Feynman-Kac log-weight and transport phase at every node."""
        b = self.as_batch()
        phase_steps, cross_phase = _phase_increments(bundle, b)
        phase = np.concatenate([[0.0], np.cumsum(phase_steps[0] + cross_phase[0])])
        if q is None:
            logw = np.zeros(len(self.z))
        else:
            vals = q(self.model, self.charts, self.z)
            inc = -0.5 * (vals[1:] + vals[:-1]) * self.grid.dt
            logw = np.concatenate([[0.0], np.cumsum(inc)])
        return logw, phase

    def to_csv(self, path, bundle: BundleData, q: SymbolSpec | None = None) -> None:
        logw, phase = self.trace(bundle, q)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "chart", "u1", "u2", "log_weight", "phase"])
            for i, (c, z) in enumerate(zip(self.charts, self.z)):
                w.writerow([i, int(c), repr(z.real), repr(z.imag), repr(logw[i]), repr(phase[i])])


# -- samplers on blocks -----------------------------------------------------

def _plane_sigma_u(model: KahlerModel, D: float, dt: float) -> float:
    # chart coordinates carry g = 4 * metric_scale * I
    return np.sqrt(2.0 * D * dt / (4.0 * model.metric_scale))


def plane_forward_block(model: KahlerModel, z0: complex, D: float, grid: TimeGrid, rng, n: int) -> PathBatch:
    normals = rng.standard_normal((n, grid.n_steps, 2))
    sig = _plane_sigma_u(model, D, grid.dt)
    steps = sig * (normals[..., 0] + 1j * normals[..., 1])
    z = np.empty((n, grid.n_steps + 1), dtype=complex)
    z[:, 0] = z0
    np.cumsum(steps, axis=1, out=z[:, 1:])
    z[:, 1:] += z0
    return PathBatch(np.zeros(z.shape, dtype=np.int8), z, grid)


def plane_bridge_block(model: KahlerModel, zx: complex, zy: complex, D: float, grid: TimeGrid, rng, n: int) -> PathBatch:
    normals = rng.standard_normal((n, grid.n_steps, 2))
    sig = _plane_sigma_u(model, D, grid.dt)
    W = np.zeros((n, grid.n_steps + 1), dtype=complex)
    np.cumsum(sig * (normals[..., 0] + 1j * normals[..., 1]), axis=1, out=W[:, 1:])
    frac = grid.times / grid.t_end
    z = zx + frac * (zy - zx) + (W - frac * W[:, -1:])
    z[:, 0] = zx
    z[:, -1] = zy
    return PathBatch(np.zeros(z.shape, dtype=np.int8), z, grid)


def sphere_forward_block(model: KahlerModel, start: ChartPoint, D: float, grid: TimeGrid, rng, n: int) -> PathBatch:
    """Geodesic random walk: tangent Gaussian step, then the exponential map."""
    normals = rng.standard_normal((n, grid.n_steps, 3))
    sig = np.sqrt(2.0 * D * grid.dt) / model.radius
    X = np.broadcast_to(to_unit_vector(start.chart, start.z), (n, 3)).copy()
    chart = np.full(n, start.chart, dtype=np.int8)
    charts = np.empty((n, grid.n_steps + 1), dtype=np.int8)
    zs = np.empty((n, grid.n_steps + 1), dtype=complex)
    charts[:, 0] = start.chart
    zs[:, 0] = start.z
    for i in range(grid.n_steps):
        g = sig * normals[:, i, :]
        v = g - np.einsum("ij,ij->i", g, X)[:, None] * X
        a = np.sqrt(np.einsum("ij,ij->i", v, v))
        X = np.cos(a)[:, None] * X + np.sinc(a / np.pi)[:, None] * v
        X /= np.sqrt(np.einsum("ij,ij->i", X, X))[:, None]
        z = from_unit_vector(X, chart)
        switch = ~(np.abs(z) <= SWITCH_RADIUS)
        if switch.any():
            chart = np.where(switch, 1 - chart, chart).astype(np.int8)
            z = np.where(switch, from_unit_vector(X, chart), z)
        charts[:, i + 1] = chart
        zs[:, i + 1] = z
    return PathBatch(charts, zs, grid)


def forward_block(model: KahlerModel, start: ChartPoint, D: float, grid: TimeGrid, rng, n: int) -> PathBatch:
    if model.kind == PLANE:
        return plane_forward_block(model, start.z, D, grid, rng, n)
    return sphere_forward_block(model, start, D, grid, rng, n)


# -- functionals on batches -------------------------------------------------

def _phase_increments(bundle: BundleData, batch: PathBatch):
    """Midpoint-rule increments of Im(theta) per step, and arg(tau) at chart switches."""
    zp, zn = batch.z[:, :-1], batch.z[:, 1:]
    cp, cn = batch.charts[:, :-1], batch.charts[:, 1:]
    cross = cn != cp
    with np.errstate(divide="ignore", invalid="ignore"):
        zn_prev = np.where(cross, 1.0 / zn, zn)  # end node in the step's chart
    mid = 0.5 * (zp + zn_prev)
    steps = np.imag(bundle.theta_z(mid) * (zn_prev - zp))
    k = bundle.model.k if bundle.model.kind == SPHERE else 0
    cross_phase = np.where(cross, k * np.angle(zn_prev), 0.0)
    return steps, cross_phase


def transport_batch(bundle: BundleData, batch: PathBatch) -> np.ndarray:
    """Coefficient ``Z`` of inverse horizontal transport along each path.

    ``H^{-1} s_end(B_t) = Z s_start(B_0)``.  ``|Z|`` is set exactly from the end
    point potentials; only the phase is integrated (Stratonovich midpoint).
    """
    steps, cross_phase = _phase_increments(bundle, batch)
    phase = steps.sum(axis=1) + cross_phase.sum(axis=1)
    log_mod = -0.5 * (bundle.phi(batch.z[:, -1]) - bundle.phi(batch.z[:, 0]))
    return np.exp(log_mod + 1j * phase)


def fk_log_weight_batch(model: KahlerModel, q: SymbolSpec, batch: PathBatch) -> np.ndarray:
    """Trapezoidal ``-int_0^t q(B_r) dr`` for the variable part of ``q``."""
    if q.is_constant:
        return np.zeros(len(batch))
    vals = q.variable(model, batch.charts, batch.z)
    inner = vals[:, 1:-1].sum(axis=1) + 0.5 * (vals[:, 0] + vals[:, -1])
    return -batch.grid.dt * inner


def transport_along(b: BundleData, path: PathRecord) -> complex:
    return complex(transport_batch(b, path.as_batch())[0])


def fk_functional(q: SymbolSpec, path: PathRecord) -> float:
    """``exp(-int q)`` along the recorded path, constant part included."""
    lw = fk_log_weight_batch(path.model, q, path.as_batch())[0] - q.shift * path.grid.t_end
    return float(np.exp(lw))


# -- single-path API ------------------------------------------------------------

def _single(block_fn, seed: SeedSpec):
    block, row = divmod(int(seed.index), BLOCK_SIZE)
    batch = block_fn(seed.block_rng(block), row + 1)
    return PathBatch(batch.charts[row:row + 1], batch.z[row:row + 1], batch.grid)


def sample_brownian(model: KahlerModel, x: ChartPoint, D: float, grid: TimeGrid, seed: SeedSpec) -> PathRecord:
    if D < 0:
        raise ValueError("D must be non-negative")
    batch = _single(partial(_forward_fn, model, x, D, grid), seed)
    return PathRecord.from_batch(model, batch)


def sample_bridge_plane(model: KahlerModel, x: ChartPoint, y: ChartPoint, D: float, grid: TimeGrid,
                        seed: SeedSpec) -> PathRecord:
    if model.kind != PLANE:
        raise UnsupportedModelError("exact bridges exist only on the plane; use matrix elements on the sphere")
    batch = _single(partial(_bridge_fn, model, x.z, y.z, D, grid), seed)
    return PathRecord.from_batch(model, batch)


def _forward_fn(model, x, D, grid, rng, n):
    return forward_block(model, x, D, grid, rng, n)


def _bridge_fn(model, zx, zy, D, grid, rng, n):
    return plane_bridge_block(model, zx, zy, D, grid, rng, n)


# -- Monte Carlo driver ---------------------------------------------------------

@dataclass
class BlockSums:
    s1: np.ndarray
    s2: np.ndarray
    n: int
    rejected: int

    def __add__(self, other: "BlockSums") -> "BlockSums":
        return BlockSums(self.s1 + other.s1, self.s2 + other.s2, self.n + other.n, self.rejected + other.rejected)


@dataclass
class MCMean:
    mean: np.ndarray
    stderr: np.ndarray
    n: int
    rejected: int


def tree_reduce(parts: list):
    """Pairwise reduction in a fixed shape determined only by ``len(parts)``."""
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _block_sums(value_fn, seed: int, key: tuple, block: int, n: int) -> BlockSums:
    vals = np.asarray(value_fn(block_rng(seed, key, block), n))  # (n, ...) complex
    ok = np.all(np.isfinite(vals).reshape(n, -1), axis=1)
    good = vals[ok]
    return BlockSums(good.sum(axis=0), (np.abs(good) ** 2).sum(axis=0), int(ok.sum()), int(n - ok.sum()))


def mc_mean(value_fn: Callable, n_paths: int, seed: int, key: tuple = (), workers: int = 1) -> MCMean:
    """Mean and standard error of ``value_fn(rng, n) -> (n, ...)`` over ``n_paths`` paths.

    ``value_fn`` must be picklable when ``workers > 1``.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths for a standard error")
    sizes = [BLOCK_SIZE] * (n_paths // BLOCK_SIZE)
    if n_paths % BLOCK_SIZE:
        sizes.append(n_paths % BLOCK_SIZE)
    jobs = [partial(_block_sums, value_fn, seed, tuple(key), j, n) for j, n in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_call, jobs))
    else:
        parts = [job() for job in jobs]
    tot = tree_reduce(parts)
    if tot.rejected > MAX_REJECTION_RATE * n_paths:
        raise SamplerError(f"{tot.rejected} of {n_paths} paths rejected")
    n = tot.n
    mean = tot.s1 / n
    var = np.maximum(tot.s2 - n * np.abs(mean) ** 2, 0.0) / (n - 1)
    return MCMean(mean, np.sqrt(var / n), n, tot.rejected)


def _call(job):
    return job()


# -- semigroup action -----------------------------------------------------------

def _semigroup_values(bundle: BundleData, q: SymbolSpec, D: float, x: ChartPoint, grid: TimeGrid, psi, rng, n):
    batch = forward_block(bundle.model, x, D, grid, rng, n)
    w = np.exp(fk_log_weight_batch(bundle.model, q, batch)) * transport_batch(bundle, batch)
    vals = np.asarray(psi(batch.charts[:, -1], batch.z[:, -1]))
    return w * vals if vals.ndim == 1 else (w * vals).T


def semigroup_apply(b: BundleData, q: SymbolSpec, D: float, t: float, psi, x: ChartPoint, n_paths: int,
                    grid: TimeGrid | None = None, seed: SeedSpec | int = 0, workers: int = 1) -> MCMean:
    """Monte Carlo ``(exp(-t S) psi)(x)`` as a coefficient in the frame of ``x.chart``.

    ``S`` has form ``D * Bochner + q``.  ``psi`` maps ``(chart, z)`` arrays of
    shape ``(n,)`` to coefficients in that chart's frame, either ``(n,)`` or
    ``(m, n)`` for ``m`` sections sharing the same paths.  The constant part of
    ``q`` is applied as the exact factor ``exp(-q.shift * t)``.
    """
    grid = grid or TimeGrid(t, 100)
    if abs(grid.t_end - t) > 1e-12 * max(1.0, t):
        raise ValueError("grid.t_end must equal t")
    if not isinstance(seed, SeedSpec):
        seed = SeedSpec(int(seed))
    fn = partial(_semigroup_values, b, q, D, x, grid, psi)
    res = mc_mean(fn, n_paths, seed.seed, seed.key, workers)
    factor = np.exp(-q.shift * t)
    res.mean, res.stderr = res.mean * factor, res.stderr * factor
    return res
