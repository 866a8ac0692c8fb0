import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from bergmc.bundle import BundleData
from bergmc.errors import SamplerError, UnsupportedModelError
from bergmc.geometry import ChartPoint, KahlerModel, chart_transition, to_unit_vector
from bergmc.magnetic import build_lattice, heat_apply
from bergmc.paths import (
    BLOCK_SIZE,
    PathRecord,
    SeedSpec,
    TimeGrid,
    block_rng,
    fk_functional,
    forward_block,
    mc_mean,
    plane_bridge_block,
    sample_bridge_plane,
    sample_brownian,
    semigroup_apply,
    transport_along,
    transport_batch,
)
from bergmc.symbols import SymbolSpec

SEED = 20240607


def test_time_grid():
    g = TimeGrid(0.5, 10)
    assert g.dt == pytest.approx(0.05) and len(g.times) == 11 and g.times[-1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        TimeGrid(0.5, 0)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 3)


@pytest.mark.parametrize("model", [KahlerModel.plane(1.0), KahlerModel.sphere(2)])
def test_zero_diffusion_is_constant_path(model):
    x = ChartPoint(0, (0.3, -0.2))
    p = sample_brownian(model, x, 0.0, TimeGrid(1.0, 20), SeedSpec(SEED, 3))
    assert np.all(p.z == x.z) and np.all(p.charts == 0)
    assert transport_along(BundleData(model), p) == 1.0


def test_plane_riemannian_variance():
    # generator D * Laplacian: variance 2 D t per orthonormal direction, i.e. in X = 2 u
    D, t, n = 0.7, 0.8, 100_000
    m = KahlerModel.plane(1.0)
    batch = forward_block(m, ChartPoint(0, (0.0, 0.0)), D, TimeGrid(t, 4), block_rng(SEED, (), 0), n)
    X = 2 * batch.z[:, -1]
    for comp in (X.real, X.imag):
        var = comp.var(ddof=1)
        se = var * np.sqrt(2 / (n - 1))
        assert abs(var - 2 * D * t) < 3 * se
    # independent of hbar, since the pinned metric is
    b2 = forward_block(KahlerModel.plane(3.0), ChartPoint(0, (0.0, 0.0)), D, TimeGrid(t, 4), block_rng(SEED, (), 0), 10)
    np.testing.assert_array_equal(b2.z, batch.z[:10])


def test_sphere_mean_cosine_matches_heat_series():
    # E[cos dist(x, B_t)] = e^{-2 D t} on the unit sphere (l = 1 eigenvalue), and the same from the
    # Legendre series integrated over the sphere
    from bergmc.bergman import sphere_heat_series, sphere_rule

    m = KahlerModel.sphere(1)
    b = BundleData(m)
    D, t = 1.0, 0.2
    x = ChartPoint(0, (0.4, 0.1))
    n = 20_000
    batch = forward_block(m, x, D, TimeGrid(t, 200), block_rng(SEED, (1,), 0), n)
    X0 = to_unit_vector(0, x.z)
    ends = np.array([to_unit_vector(c, z) for c, z in zip(batch.charts[:, -1], batch.z[:, -1])])
    cosd = ends @ X0
    rule = sphere_rule(b, 40, 80)
    series = sum(w * sphere_heat_series(b, D, t, x, p) * (to_unit_vector(p.chart, p.z) @ X0)
                 for w, p in zip(rule.weights, rule.points()))
    assert series == pytest.approx(np.exp(-2 * D * t), rel=1e-8)
    assert abs(cosd.mean() - series) < 3 * cosd.std(ddof=1) / np.sqrt(n)


def test_bridge_endpoints_and_moments():
    m = KahlerModel.plane(1.0)
    D, t, n = 1.0, 1.0, 100_000
    batch = plane_bridge_block(m, 0.0, 1.0, D, TimeGrid(t, 10), block_rng(SEED, (2,), 0), n)
    assert np.all(batch.z[:, 0] == 0.0) and np.all(batch.z[:, -1] == 1.0)
    mid = batch.z[:, 5]
    for comp, mean in ((mid.real, 1 / 2), (mid.imag, 0.0)):
        assert abs(comp.mean() - mean) < 3 * comp.std(ddof=1) / np.sqrt(n)
    # Riemannian coordinates X = 2 u run from (0,0) to (2,0); midpoint variance 2 D t / 4
    for comp in ((2 * mid).real, (2 * mid).imag):
        var = comp.var(ddof=1)
        assert abs(var - 2 * D * t / 4) < 3 * var * np.sqrt(2 / (n - 1))


def test_bridge_single_path_api():
    m = KahlerModel.plane(1.0)
    x, y = ChartPoint(0, (0.1, 0.2)), ChartPoint(0, (-1.0, 0.5))
    p = sample_bridge_plane(m, x, y, 1.0, TimeGrid(1.0, 16), SeedSpec(SEED, 7))
    assert p.z[0] == x.z and p.z[-1] == y.z
    with pytest.raises(UnsupportedModelError):
        sample_bridge_plane(KahlerModel.sphere(1), x, y, 1.0, TimeGrid(1.0, 4), SeedSpec(SEED))


def test_single_path_is_a_pure_function_of_seed_and_index():
    m = KahlerModel.sphere(1)
    x = ChartPoint(0, (0.2, 0.0))
    grid = TimeGrid(1.0, 30)
    block = forward_block(m, x, 1.0, grid, block_rng(SEED, (), 1), 50)
    p = sample_brownian(m, x, 1.0, grid, SeedSpec(SEED, BLOCK_SIZE + 42))
    np.testing.assert_array_equal(p.z, block.z[42])
    np.testing.assert_array_equal(p.charts, block.charts[42])


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
def test_stokes_square_loop(plane, hbar):
    b = BundleData(KahlerModel.plane(hbar))
    pts = [ChartPoint.from_complex(0, z) for z in (0, 1, 1 + 1j, 1j, 0)]
    Z = transport_along(b, PathRecord.polyline(b.model, pts))
    # counterclockwise unit square: phase = -2 * (coordinate area) / hbar = -B_g * (Riemannian area), B_g = 1/(2 hbar)
    assert abs(Z) == pytest.approx(1.0, abs=1e-15)
    assert np.angle(Z) == pytest.approx(np.angle(np.exp(-2j / hbar)), abs=1e-10)
    rev = transport_along(b, PathRecord.polyline(b.model, pts[::-1]))
    assert rev == pytest.approx(np.conj(Z), abs=1e-14)


def test_sphere_loop_through_both_charts():
    # latitude circle |z| = 1.6 recorded half in each chart: the tau factors at the crossings must
    # reproduce the enclosed-curvature phase computed in a single chart
    k = 3
    b = BundleData(KahlerModel.sphere(k))
    r, n = 1.6, 4000
    angles = np.linspace(0, 2 * np.pi, n + 1)
    pts = []
    for a in angles:
        p = ChartPoint.from_complex(0, r * np.exp(1j * a))
        pts.append(chart_transition(b.model, p, 1) if np.pi / 2 < a < 3 * np.pi / 2 else p)
    rec = PathRecord.polyline(b.model, pts)
    assert len(rec.crossings) == 2
    Z = transport_along(b, rec)
    area = 4 * np.pi * r**2 / (1 + r**2)  # Riemannian area of {|z| < r}
    expect = -k / 2 * area  # curvature B_g = k / 2
    assert abs(Z) == pytest.approx(1.0, abs=1e-14)
    assert abs(np.angle(Z * np.exp(-1j * expect))) < 1e-5


def test_holonomy_modulus_rule(sphere2):
    x = ChartPoint(0, (1.1, 0.2))
    batch = forward_block(sphere2.model, x, 1.0, TimeGrid(1.0, 50), block_rng(SEED, (3,), 0), 256)
    Z = transport_batch(sphere2, batch)
    # h-norm preservation: |Z|^2 e^{-phi(x)} = e^{-phi(B_t)} in the end chart
    np.testing.assert_allclose(np.abs(Z) ** 2 * np.exp(-sphere2.phi(x.z)), np.exp(-sphere2.phi(batch.z[:, -1])),
                               rtol=1e-14)


def test_fk_functional_examples(plane):
    m = plane.model
    pts = [ChartPoint(0, (s, 0.5 * s)) for s in np.linspace(0, 1, 11)]
    rec = PathRecord.polyline(m, pts, t_end=2.0)
    assert fk_functional(SymbolSpec.zero(), rec) == 1.0
    assert fk_functional(SymbolSpec.const(0.3), rec) == pytest.approx(np.exp(-0.6), rel=1e-15)


def test_fk_functional_matches_refined_quadrature(plane):
    curve = lambda s: np.cos(s) + 0.5j * np.sin(2 * s)  # noqa: E731
    n, T = 20_000, 1.5
    s = np.linspace(0, T, n + 1)
    rec = PathRecord.polyline(plane.model, [ChartPoint.from_complex(0, z) for z in curve(s)], t_end=T)
    exact, _ = quad(lambda r: abs(curve(r)) ** 2, 0, T, epsabs=1e-13, epsrel=1e-13)
    assert np.log(fk_functional(SymbolSpec.abs2(), rec)) == pytest.approx(-exact, abs=1e-8)


def test_path_csv_dump(tmp_path, plane):
    rec = sample_brownian(plane.model, ChartPoint(0, (0.0, 0.0)), 1.0, TimeGrid(1.0, 5), SeedSpec(SEED))
    out = tmp_path / "path.csv"
    rec.to_csv(out, plane, SymbolSpec.abs2())
    lines = out.read_text().splitlines()
    assert lines[0] == "step,chart,u1,u2,log_weight,phase" and len(lines) == 7


def test_mc_mean_determinism_across_workers(sphere2):
    from bergmc.bergman import BasisSpec

    basis = BasisSpec(sphere2).orthonormalize()
    x = ChartPoint(0, (0.9, 0.3))
    args = (sphere2, SymbolSpec.cos_theta(), 2.0, 0.5, basis.eta, x, 3 * BLOCK_SIZE + 5, TimeGrid(0.5, 10),
            SeedSpec(SEED, key=(4,)))
    r1 = semigroup_apply(*args, workers=1)
    r3 = semigroup_apply(*args, workers=3)
    np.testing.assert_array_equal(r1.mean, r3.mean)
    np.testing.assert_array_equal(r1.stderr, r3.stderr)


def test_mc_mean_rejections():
    def bad(rng, n):
        v = rng.standard_normal(n)
        v[:50] = np.nan
        return v

    with pytest.raises(SamplerError):
        mc_mean(bad, 1000, SEED)

    def few_bad(rng, n):
        v = rng.standard_normal(n)
        v[:5] = np.inf
        return v

    res = mc_mean(few_bad, 1000, SEED)
    assert res.rejected == 5 and res.n == 995


def test_constant_shift_factorizes_exactly(plane):
    x = ChartPoint(0, (0.3, 0.1))
    psi = lambda c, z: z  # noqa: E731
    a = semigroup_apply(plane, SymbolSpec.abs2(), 1.0, 0.4, psi, x, 3000, TimeGrid(0.4, 20), SEED)
    b = semigroup_apply(plane, SymbolSpec.abs2().shifted(1.3), 1.0, 0.4, psi, x, 3000, TimeGrid(0.4, 20), SEED)
    assert b.mean == pytest.approx(np.exp(-1.3 * 0.4) * a.mean, rel=1e-14)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_holomorphic_sections_are_lowest_landau_level(plane, n):
    # D * Bochner acts on holomorphic sections as -D rho = D / (2 hbar), so e^{-tS} z^n = e^{-tD/2} z^n
    x = ChartPoint(0, (0.5, 0.3))
    D, t = 1.0, 0.2
    est = semigroup_apply(plane, SymbolSpec.zero(), D, t, lambda c, z: z**n, x, 40_000, TimeGrid(t, 40), SEED)
    expect = np.exp(-t * D / 2) * x.z**n
    assert abs(est.mean - expect) < 3 * est.stderr + 1e-3 * t


def test_semigroup_short_time_rate(plane):
    # error of e^{-tS} psi against psi(x) shrinks roughly linearly under t-halving for a
    # non-holomorphic section
    x = ChartPoint(0, (0.4, -0.2))
    psi = lambda c, z: np.abs(z) ** 2  # noqa: E731
    errs = []
    for t in (0.2, 0.1, 0.05):
        est = semigroup_apply(plane, SymbolSpec.zero(), 1.0, t, psi, x, 40_000, TimeGrid(t, 20), SEED)
        errs.append(abs(est.mean - psi(0, x.z)))
    assert errs[2] < errs[1] < errs[0]
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.35)


def test_semigroup_against_lattice(plane):
    # (e^{-tS} psi)(x) on the plane with S = D Bochner + |z|^2, from the Peierls lattice: apply the
    # lattice semigroup to psi e^{-phi/2} (unitary frame) and return to the holomorphic frame
    D, t = 1.0, 0.5
    x = ChartPoint(0, (0.2, 0.4))
    psi = lambda c, z: 1.0 + 0.5 * z  # noqa: E731
    vals = []
    for h in (0.2, 0.1):
        lat = build_lattice(plane, D, h, 13.2, SymbolSpec.abs2())
        xs = h * np.arange(-lat.n, lat.n + 1)
        X1, X2 = np.meshgrid(xs, xs, indexing="ij")
        u = (X1 + 1j * X2).ravel() / 2
        v = psi(0, u) * np.exp(-plane.phi(u) / 2)
        w = heat_apply(lat, v.astype(complex), t) * np.exp(t * D * plane.rho(0.0))  # remove the D rho term
        vals.append(w[lat.index(2 * np.array(x.u))] * np.exp(plane.phi(x.z) / 2))
    ref = (16 * vals[1] - vals[0]) / 15
    est = semigroup_apply(plane, SymbolSpec.abs2(), D, t, psi, x, 40_000, TimeGrid(t, 100), SEED)
    assert abs(est.mean - ref) < 3 * est.stderr + 2e-3 * abs(ref)


@given(st.integers(0, 2**32), st.integers(0, 5))
def test_block_rng_streams_are_distinct(seed, block):
    a = block_rng(seed, (1,), block).standard_normal(4)
    b = block_rng(seed, (2,), block).standard_normal(4)
    c = block_rng(seed, (1,), block).standard_normal(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, c)
