"""The acceptance suite: one function per criterion, shared by ``bergmc validate`` and the tests.

Each function returns a :class:`CriterionResult`.  ``profile = "full"`` runs the
stated sample sizes; ``"quick"`` shrinks Monte Carlo work (tolerances are
unchanged) for a fast smoke run of the same checks.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bergman import BasisSpec, kernel_series, reproducing_residual, semigroup_matrix, toeplitz_matrix
from .bundle import BundleData, prequantum_residual, rho_at
from .dk import (
    DLadder,
    MCConfig,
    dk_extrapolate,
    finite_d_kernel,
    finite_d_matrix,
    kato_kappa,
    kato_probes,
    khasminskii_check,
    monotonicity_check,
    oracle_ladder,
)
from .geometry import SPHERE, ChartPoint, KahlerModel, to_unit_vector
from .magnetic import magnetic_oracle_plane
from .paths import SeedSpec, TimeGrid, forward_block, semigroup_apply, transport_batch
from .symbols import SymbolSpec

SEED = 20240607

PROFILES = {
    "full": dict(c4_paths=100_000, c5_paths=100_000, c5_steps=200, c6_paths=10_000, c6_nodes=(10, 20),
                 c6_steps=100, c7_paths=2000, c8_paths=20_000),
    "quick": dict(c4_paths=20_000, c5_paths=20_000, c5_steps=100, c6_paths=500, c6_nodes=(6, 12),
                  c6_steps=50, c7_paths=500, c8_paths=4096),
}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.name} :: {self.detail} " \
               f"({self.seconds:.1f} s)"


def _timed(fn):
    def run(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def _probe_grid(model: KahlerModel, n: int = 4) -> list[ChartPoint]:
    if model.kind == SPHERE:
        pts = []
        for c in (0, 1):
            for r in np.linspace(0.1, 1.4, n):
                for a in np.linspace(0.3, 2 * np.pi, n, endpoint=False):
                    pts.append(ChartPoint.from_complex(c, r * np.exp(1j * a)))
        return pts
    s = np.sqrt(model.hbar)
    xs = np.linspace(-2 * s, 2 * s, n)
    return [ChartPoint(0, (float(a), float(b))) for a in xs for b in xs]


@_timed
def criterion_1(profile: str = "full") -> CriterionResult:
    """Prequantum pinning and constant rho on every shipped model."""
    models = [KahlerModel.plane(h) for h in (0.5, 1.0, 2.0)] + [KahlerModel.sphere(k) for k in (1, 2, 4)]
    worst_res, worst_rho = 0.0, 0.0
    for m in models:
        b = BundleData(m)
        expect = -2.0 / (4 * m.hbar)  # real dimension 2
        for p in _probe_grid(m):
            worst_res = max(worst_res, prequantum_residual(b, p))
            worst_rho = max(worst_rho, abs(rho_at(b, p) - expect))
    ok = worst_res < 1e-10 and worst_rho < 1e-10
    return CriterionResult(1, "convention pinning", ok,
                           f"max prequantum residual {worst_res:.2e}, max |rho + 1/(2 hbar)| {worst_rho:.2e} (< 1e-10)",
                           data=dict(residual=worst_res, rho_error=worst_rho))


@_timed
def criterion_2(profile: str = "full") -> CriterionResult:
    """Reproducing identity by quadrature for every basis section at 10 probes."""
    out = {}
    rng = np.random.default_rng(SEED)
    for label, b, N in (("plane N=16", BundleData(KahlerModel.plane(1.0)), 16),
                        ("sphere k=2", BundleData(KahlerModel.sphere(2)), 3)):
        basis = BasisSpec(b, N=N).orthonormalize()
        if b.model.kind == SPHERE:
            probes = [ChartPoint.from_complex(int(c), z) for c, z in
                      zip(rng.integers(0, 2, 10), 1.3 * np.sqrt(rng.random(10)) * np.exp(2j * np.pi * rng.random(10)))]
        else:
            probes = [ChartPoint.from_complex(0, z) for z in
                      2.0 * np.sqrt(rng.random(10)) * np.exp(2j * np.pi * rng.random(10))]
        out[label] = max(reproducing_residual(basis, j, probes) for j in range(N))
    worst = max(out.values())
    detail = ", ".join(f"{k}: {v:.2e}" for k, v in out.items()) + " (< 1e-6)"
    return CriterionResult(2, "reproducing identity", worst < 1e-6, detail, data=out)


@_timed
def criterion_3(profile: str = "full") -> CriterionResult:
    """Toeplitz spectra against closed forms."""
    bp = BasisSpec(BundleData(KahlerModel.plane(1.0)), N=16).orthonormalize()
    ev_p = toeplitz_matrix(SymbolSpec.abs2(), bp).eigh()[0]
    err_p = float(np.max(np.abs(ev_p - np.arange(1, 17))))
    bs = BasisSpec(BundleData(KahlerModel.sphere(2))).orthonormalize()
    ev_s = toeplitz_matrix(SymbolSpec.cos_theta(), bs).eigh()[0]
    err_s = float(np.max(np.abs(ev_s - np.array([-0.5, 0.0, 0.5]))))
    ok = err_p < 1e-8 and err_s < 1e-8
    return CriterionResult(3, "Toeplitz spectra", ok,
                           f"plane |z|^2 spectrum error {err_p:.2e}, sphere cos_theta spectrum error {err_s:.2e} (< 1e-8)",
                           data=dict(plane=ev_p.tolist(), sphere=ev_s.tolist()))


@_timed
def criterion_4(profile: str = "full", workers: int = 1) -> CriterionResult:
    """Bridge Feynman-Kac kernel against the lattice oracle."""
    p = PROFILES[profile]
    b = BundleData(KahlerModel.plane(1.0))
    x = ChartPoint(0, (0.0, 0.0))
    est = finite_d_kernel(b, SymbolSpec.zero(), 1.0, 0.5, x, x, MCConfig(p["c4_paths"], 500, SEED, workers))
    orc = magnetic_oracle_plane(b, 1.0, 0.5, x, x)
    diff = abs(est.value - orc.value)
    rel = est.stderr / abs(est.value)
    ok = diff <= 3 * est.stderr and rel <= 0.01
    return CriterionResult(4, "Feynman-Kac vs lattice oracle", ok,
                           f"MC {est.value.real:.6f}{est.value.imag:+.1e}i +- {est.stderr:.1e}, oracle "
                           f"{orc.value.real:.6f}; |diff| = {diff / est.stderr:.2f} stderr, stderr/|value| = {rel:.2e}",
                           data=dict(mc=est.value, stderr=est.stderr, oracle=orc.value))


@_timed
def criterion_5(profile: str = "full", workers: int = 1) -> CriterionResult:
    """D -> infinity extrapolation of the plane kernel to the Bergman kernel."""
    p = PROFILES[profile]
    b = BundleData(KahlerModel.plane(1.0))
    x = ChartPoint(0, (0.0, 0.0))
    Ds = (4.0, 8.0, 16.0, 32.0)
    target = kernel_series(BasisSpec(b, N=16).orthonormalize(), x, x).value
    ests = [finite_d_kernel(b, SymbolSpec.zero(), D, 1.0, x, x, MCConfig(p["c5_paths"], p["c5_steps"], SEED, workers))
            for D in Ds]
    mc_fit = dk_extrapolate(DLadder.from_estimates(ests))
    olad = oracle_ladder(b, None, 1.0, x, x, Ds)
    or_fit = dk_extrapolate(olad)
    tol = max(3 * mc_fit.stderr, 2 * or_fit.max_residual)
    mc_err = abs(mc_fit.limit - target)
    or_rel = abs(or_fit.limit - target) / abs(target)
    ok_mc = mc_err <= tol
    ok_or = or_rel <= 1e-3
    detail = (f"MC limit {mc_fit.limit.real:.5f} +- {mc_fit.stderr:.1e} vs K(0,0) = {target.real:.5f}: "
              f"{'ok' if ok_mc else 'FAIL'} (|diff| {mc_err:.1e} <= {tol:.1e}); oracle-ladder limit "
              f"{or_fit.limit.real:.5f}, relative error {or_rel:.1e} vs 1e-3: {'ok' if ok_or else 'FAIL'}")
    return CriterionResult(5, "Daubechies-Klauder limit, kernel form", ok_mc and ok_or, detail,
                           data=dict(D=Ds, mc=[e.value for e in ests], stderr=[e.stderr for e in ests],
                                     mc_limit=mc_fit.limit, mc_limit_stderr=mc_fit.stderr, oracle=olad.values,
                                     oracle_limit=or_fit.limit, oracle_residual=or_fit.max_residual, target=target))


@_timed
def criterion_6(profile: str = "full", workers: int = 1) -> CriterionResult:
    """Sphere matrix elements, extrapolated in D, against exp(-t M)."""
    p = PROFILES[profile]
    b = BundleData(KahlerModel.sphere(2))
    basis = BasisSpec(b).orthonormalize()
    f = SymbolSpec.cos_theta()
    oracle = semigroup_matrix(toeplitz_matrix(f, basis), 1.0)
    Ds = (8.0, 16.0, 32.0)
    mats = [finite_d_matrix(b, f, D, 1.0, basis, MCConfig(p["c6_paths"], p["c6_steps"], SEED, workers),
                            p["c6_nodes"]) for D in Ds]
    lim = np.zeros((3, 3), dtype=complex)
    err = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            fit = dk_extrapolate(DLadder(list(Ds), [m.values[i, j] for m in mats], [m.stderr[i, j] for m in mats]))
            lim[i, j], err[i, j] = fit.limit, fit.stderr
    z = np.abs(lim - oracle) / np.where(err > 0, err, np.inf)
    ok = bool(np.all(np.abs(lim - oracle) <= 3 * err))
    detail = (f"max |limit - oracle| / stderr = {z.max():.2f} over 9 elements; median combined stderr "
              f"{np.median(err):.1e} (sign problem: weights grow like e^(D t k/2))")
    return CriterionResult(6, "Daubechies-Klauder limit, sphere matrix form", ok, detail,
                           data=dict(limit=lim, stderr=err, oracle=oracle,
                                     per_D=[(m.D, m.values, m.stderr) for m in mats]))


@_timed
def criterion_7(profile: str = "full", workers: int = 1) -> CriterionResult:
    """Khasminskii bound for q = 0.5 and the small-time decay of kappa for q = |z|^2."""
    p = PROFILES[profile]
    m = KahlerModel.plane(1.0)
    x = ChartPoint(0, (0.0, 0.0))
    kh = khasminskii_check(m, SymbolSpec.const(0.5), 1.0, 1.0, x, MCConfig(p["c7_paths"], 50, SEED, workers))
    probes = kato_probes(m)
    ks = [kato_kappa(m, SymbolSpec.abs2(), 1.0, t, probes, MCConfig(p["c7_paths"], 20, SEED, workers))
          for t in (0.1, 0.01, 0.001)]
    dec = all(b.kappa < a.kappa for a, b in zip(ks, ks[1:]))
    ok = bool(kh.passed) and dec
    detail = (f"Khasminskii lhs {kh.lhs:.4f} <= bound {kh.bound:.4f}: {kh.passed}; kappa(|z|^2) at t = 0.1, 0.01, "
              f"0.001: {', '.join(f'{k.kappa:.3g}' for k in ks)} (strictly decreasing: {dec})")
    return CriterionResult(7, "Kato diagnostics", ok, detail,
                           data=dict(lhs=kh.lhs, bound=kh.bound, kappa=[k.kappa for k in ks]))


def _phi_from_unit(k: int, chart: int, X3: np.ndarray) -> np.ndarray:
    # 1 + |z|^2 = 2 / (1 - X3) in the south chart and 2 / (1 + X3) in the north chart
    return k * np.log(2.0 / (1.0 - X3 if chart == 0 else 1.0 + X3))


@_timed
def criterion_8(profile: str = "full", workers: int = 1) -> CriterionResult:
    """Structural invariants of the estimators."""
    p = PROFILES[profile]
    checks = {}
    # holonomy modulus rule on sphere paths that cross charts, weights from unit-vector geometry
    b2 = BundleData(KahlerModel.sphere(2))
    grid = TimeGrid(1.0, 100)
    x0 = ChartPoint.from_complex(0, 0.9 + 0.3j)
    batch = forward_block(b2.model, x0, 1.0, grid, SeedSpec(SEED).block_rng(0), 512)
    Z = transport_batch(b2, batch)
    X_end = np.array([to_unit_vector(c, z) for c, z in zip(batch.charts[:, -1], batch.z[:, -1])])
    X_start = to_unit_vector(0, x0.z)
    phi_end = np.array([_phi_from_unit(2, int(c), X[2]) for c, X in zip(batch.charts[:, -1], X_end)])
    phi_start = _phi_from_unit(2, 0, X_start[2])
    mod_err = float(np.max(np.abs(np.abs(Z) / np.exp(-(phi_end - phi_start) / 2) - 1)))
    crossed = int(np.sum(np.any(batch.charts != batch.charts[:, :1], axis=1)))
    checks["holonomy modulus"] = (mod_err < 1e-14 and crossed > 0, f"{mod_err:.1e} ({crossed} paths crossed charts)")

    # constant-shift covariance at fixed seed
    b = BundleData(KahlerModel.plane(1.0))
    x, y = ChartPoint(0, (0.2, 0.4)), ChartPoint(0, (-0.4, 0.2))
    mc = MCConfig(p["c8_paths"], 100, SEED, workers)
    f = SymbolSpec.abs2()
    e0 = finite_d_kernel(b, f, 1.0, 0.5, x, y, mc)
    e1 = finite_d_kernel(b, f.shifted(0.7), 1.0, 0.5, x, y, mc)
    shift_err = abs(e1.value - np.exp(-0.35) * e0.value) / abs(e0.value)
    checks["constant shift"] = (shift_err < 1e-13, f"relative {shift_err:.1e}")

    # determinism across worker counts (sphere semigroup, several blocks)
    basis = BasisSpec(b2).orthonormalize()
    runs = [semigroup_apply(b2, SymbolSpec.cos_theta(), 2.0, 0.5, basis.eta, x0, 5000, TimeGrid(0.5, 20),
                            SeedSpec(SEED, key=(8,)), w).mean for w in (1, 2)]
    same = bool(np.array_equal(runs[0], runs[1]))
    checks["worker determinism"] = (same, "bitwise" if same else "differs")

    # step-size halving
    vals = [finite_d_kernel(b, f, 1.0, 0.5, x, y, MCConfig(p["c8_paths"], n, SEED + n, workers)) for n in (25, 50, 100)]
    d1 = abs(vals[1].value - vals[0].value)
    d2 = abs(vals[2].value - vals[1].value)
    band = 3 * np.hypot(vals[2].stderr, vals[1].stderr)
    checks["dt halving"] = (d2 <= max(band, d1), f"|v100 - v50| = {d2:.1e} vs max(3 sigma {band:.1e}, |v50 - v25| {d1:.1e})")

    # hermiticity and diagonal positivity
    eyx = finite_d_kernel(b, f, 1.0, 0.5, y, x, MCConfig(p["c8_paths"], 100, SEED + 1, workers))
    herm = abs(e0.value - np.conj(eyx.value)) <= 3 * np.hypot(e0.stderr, eyx.stderr)
    ed = finite_d_kernel(b, f, 1.0, 0.5, x, x, mc)
    pos = ed.value.real > 0 and abs(ed.value.imag) <= 3 * ed.stderr
    checks["hermiticity"] = (bool(herm), f"|K(x,y) - conj K(y,x)| = {abs(e0.value - np.conj(eyx.value)):.1e}")
    checks["diagonal positivity"] = (bool(pos), f"K(x,x) = {ed.value.real:.4f}{ed.value.imag:+.1e}i")

    # D-monotonicity: strict for the oracle ladder, within bands for MC
    Ds = (4.0, 8.0, 16.0, 32.0)
    o = monotonicity_check(oracle_ladder(b, None, 1.0, ChartPoint(0, (0.0, 0.0)), None, Ds))
    z0 = ChartPoint(0, (0.0, 0.0))
    mcl = DLadder.from_estimates([finite_d_kernel(b, SymbolSpec.zero(), D, 1.0, z0, z0, mc) for D in Ds])
    mmc = monotonicity_check(mcl)
    checks["D-monotonicity"] = (o.passed and o.strict and mmc.passed,
                                f"oracle strict {o.passed}, MC within bands {mmc.passed}")
    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"{k}: {'ok' if v[0] else 'FAIL'} ({v[1]})" for k, v in checks.items())
    return CriterionResult(8, "structural invariants", ok, detail, data={k: v[0] for k, v in checks.items()})


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8)


def run_all(profile: str = "full", workers: int = 1, log=None) -> list[CriterionResult]:
    out = []
    for fn in CRITERIA:
        kw = {} if fn in (criterion_1, criterion_2, criterion_3) else dict(workers=workers)
        res = fn(profile, **kw)
        if log is not None:
            log(res.line())
        out.append(res)
    return out
