import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from bergmc.bergman import (
    BasisSpec,
    gram_matrix,
    kernel_series,
    orthonormalize,
    plane_bergman_norm,
    plane_rule,
    reproducing_residual,
    sphere_heat_series,
    sphere_rule,
    toeplitz_matrix,
    toeplitz_semigroup_kernel,
    volume,
)
from bergmc.bundle import BundleData
from bergmc.errors import PrecisionError, UnsupportedModelError
from bergmc.geometry import ChartPoint, KahlerModel, chart_transition
from bergmc.symbols import SymbolSpec


def _radial_moment(n, hbar):
    # int_C |z|^{2n} e^{-|z|^2/hbar} * 4 d^2z, by 1-d quadrature in r
    val, _ = quad(lambda r: r ** (2 * n + 1) * np.exp(-r * r / hbar), 0, np.inf, epsabs=0, epsrel=1e-13)
    return 4 * 2 * np.pi * val


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
def test_plane_gram_matches_radial_moments(hbar):
    b = BundleData(KahlerModel.plane(hbar))
    G = gram_matrix(BasisSpec(b, N=12)).G
    d = np.real(np.diag(G))
    ref = np.array([_radial_moment(n, hbar) for n in range(12)])
    np.testing.assert_allclose(d, ref, rtol=1e-11)
    np.testing.assert_allclose(d, [plane_bergman_norm(b.model, n) for n in range(12)], rtol=1e-12)
    assert d[1] / d[0] == pytest.approx(hbar, rel=1e-12)
    off = np.abs(G - np.diag(np.diag(G))) / np.sqrt(np.outer(d, d))
    assert off.max() < 1e-10
    np.testing.assert_allclose(G, G.conj().T, atol=1e-12 * d.max())


def test_sphere_gram_ratios():
    b = BundleData(KahlerModel.sphere(2))
    G = gram_matrix(BasisSpec(b)).G
    d = np.real(np.diag(G))
    beta = np.array([math.factorial(n) * math.factorial(2 - n) / math.factorial(2) for n in range(3)])
    np.testing.assert_allclose(d / d[0], beta / beta[0], rtol=1e-12)
    assert np.abs(G - np.diag(np.diag(G))).max() < 1e-10 * d.max()


def test_sphere_dimension_and_volume():
    with pytest.raises(ValueError):
        BasisSpec(BundleData(KahlerModel.sphere(2)), N=4)
    for k in (1, 3):
        b = BundleData(KahlerModel.sphere(k))
        assert BasisSpec(b).N == k + 1
        v0, v1 = volume(b, sphere_rule(b, 20, 40, 0)), volume(b, sphere_rule(b, 20, 40, 1))
        assert v0 == pytest.approx(4 * np.pi, rel=1e-12) and v1 == pytest.approx(v0, rel=1e-12)


def test_orthonormalize_fixtures(rng):
    np.testing.assert_allclose(orthonormalize(np.eye(4)), np.eye(4), atol=1e-15)
    d = np.array([1.0, 4.0, 9.0])
    np.testing.assert_allclose(orthonormalize(np.diag(d)), np.diag(d**-0.5), atol=1e-15)
    A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    G = A @ A.conj().T + 0.5 * np.eye(5)
    L = orthonormalize(G)
    assert np.allclose(L, np.tril(L))
    assert np.linalg.norm(L @ G @ L.conj().T - np.eye(5)) < 1e-10
    with pytest.raises(np.linalg.LinAlgError):
        orthonormalize(np.diag([1.0, -1.0]))


def test_kernel_series_origin_and_invariance():
    b = BundleData(KahlerModel.plane(1.0))
    basis = BasisSpec(b, N=16).orthonormalize()
    o = ChartPoint(0, (0.0, 0.0))
    K = kernel_series(basis, o, o)
    # only the constant survives; |eta_0|^2 = 1 / G_00 = 1 / (4 pi hbar)
    assert K.value.real == pytest.approx(1 / (4 * np.pi), rel=1e-12) and abs(K.value.imag) < 1e-16
    x, y = ChartPoint(0, (0.5, -0.3)), ChartPoint(0, (-0.2, 0.6))
    Kxy = kernel_series(basis, x, y).value
    # closed form of the Gaussian Bergman kernel in this frame: e^{z_x conj(z_y) / hbar} / (4 pi hbar)
    assert Kxy == pytest.approx(np.exp(x.z * np.conj(y.z)) / (4 * np.pi), rel=1e-12)
    assert kernel_series(basis, y, x).value == pytest.approx(np.conj(Kxy), rel=1e-14)
    with pytest.raises(PrecisionError):
        kernel_series(BasisSpec(b, N=4).orthonormalize(), ChartPoint(0, (2.0, 0.0)), ChartPoint(0, (2.0, 0.0)))


def test_sphere_kernel_gauge_invariance():
    b = BundleData(KahlerModel.sphere(2))
    basis = BasisSpec(b).orthonormalize()
    x, y = ChartPoint(0, (1.2, 0.3)), ChartPoint(0, (-0.8, 1.1))
    base = kernel_series(basis, x, y).invariant
    for cx in (0, 1):
        for cy in (0, 1):
            xx = chart_transition(b.model, x, cx)
            yy = chart_transition(b.model, y, cy)
            K = kernel_series(basis, xx, yy)
            assert (K.chart_x, K.chart_y) == (cx, cy)
            assert K.invariant == pytest.approx(base, rel=1e-10)
    # diagonal: K(x,x) e^{-phi(x)} = (k+1) / vol
    d = kernel_series(basis, x, x).invariant
    assert np.sqrt(d) == pytest.approx(3 / (4 * np.pi), rel=1e-12)


def test_reproducing_identity_eta2(rng):
    b = BundleData(KahlerModel.plane(1.0))
    basis = BasisSpec(b, N=16).orthonormalize()
    probes = [ChartPoint.from_complex(0, z) for z in 1.5 * rng.standard_normal(6) + 1.5j * rng.standard_normal(6)]
    assert reproducing_residual(basis, 2, probes) < 1e-6


def test_toeplitz_examples():
    b = BundleData(KahlerModel.plane(1.0))
    basis = BasisSpec(b, N=12).orthonormalize()
    np.testing.assert_allclose(toeplitz_matrix(SymbolSpec.const(1.0), basis).M, np.eye(12), atol=1e-10)
    M = toeplitz_matrix(SymbolSpec.abs2(), basis).M
    np.testing.assert_allclose(M, np.diag(np.arange(1, 13)), atol=1e-8)
    for hbar in (0.5, 2.0):
        bb = BasisSpec(BundleData(KahlerModel.plane(hbar)), N=8).orthonormalize()
        ev = toeplitz_matrix(SymbolSpec.abs2(), bb).eigh()[0]
        np.testing.assert_allclose(ev, hbar * np.arange(1, 9), rtol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_sphere_cos_theta_spectrum(k):
    basis = BasisSpec(BundleData(KahlerModel.sphere(k))).orthonormalize()
    T = toeplitz_matrix(SymbolSpec.cos_theta(), basis)
    # spin-k/2 with coherent-state normalization m / (j + 1), j = k / 2
    j = k / 2
    expect = np.sort(np.arange(-j, j + 1) / (j + 1))
    np.testing.assert_allclose(T.eigh()[0], expect, atol=1e-10)
    np.testing.assert_allclose(T.M, T.M.conj().T, atol=1e-14)


def test_sphere_exact_under_quadrature_refinement():
    b = BundleData(KahlerModel.sphere(3))
    M1 = toeplitz_matrix(SymbolSpec.cos_theta(), BasisSpec(b).orthonormalize()).M
    M2 = toeplitz_matrix(SymbolSpec.cos_theta(), BasisSpec(b, n_polar=40, n_azimuth=64).orthonormalize()).M
    np.testing.assert_allclose(M1, M2, atol=1e-10)


def test_positive_symbol_gives_psd_and_semiboundedness():
    b = BundleData(KahlerModel.plane(1.0))

    def f(charts, z):
        return np.abs(z) ** 2 - 1.0 * np.abs(z)

    mins = [toeplitz_matrix(f, BasisSpec(b, N=N).orthonormalize()).eigh()[0].min() for N in (16, 32)]
    assert abs(mins[0] - mins[1]) < 1e-6
    ev = toeplitz_matrix(SymbolSpec.abs2(), BasisSpec(b, N=10).orthonormalize()).eigh()[0]
    assert ev.min() > -1e-10


def test_toeplitz_semigroup_kernel_examples():
    b = BundleData(KahlerModel.plane(1.0))
    basis = BasisSpec(b, N=16).orthonormalize()
    x, y = ChartPoint(0, (0.3, 0.2)), ChartPoint(0, (-0.1, 0.4))
    K = kernel_series(basis, x, y).value
    assert toeplitz_semigroup_kernel(SymbolSpec.abs2(), basis, 0.0, x, y).value == pytest.approx(K, rel=1e-10)
    one = toeplitz_semigroup_kernel(SymbolSpec.const(1.0), basis, 0.7, x, y).value
    assert one == pytest.approx(np.exp(-0.7) * K, rel=1e-9)
    o = ChartPoint(0, (0.0, 0.0))
    v = toeplitz_semigroup_kernel(SymbolSpec.abs2(), basis, 0.8, o, o).value
    assert v == pytest.approx(np.exp(-0.8) / (4 * np.pi), rel=1e-10)


def test_sphere_heat_series_properties():
    b = BundleData(KahlerModel.sphere(1))
    x, y = ChartPoint(0, (0.3, 0.1)), ChartPoint(1, (0.2, -0.5))
    rule = sphere_rule(b, 40, 80)
    total = sum(w * sphere_heat_series(b, 1.0, 0.1, x, p) for w, p in zip(rule.weights, rule.points()))
    assert total == pytest.approx(1.0, abs=1e-8)
    assert sphere_heat_series(b, 1.0, 0.3, x, y) == sphere_heat_series(b, 1.0, 0.3, y, x)
    assert sphere_heat_series(b, 1.0, 10.0, x, y) == pytest.approx(1 / (4 * np.pi), abs=1e-10)
    with pytest.raises(UnsupportedModelError):
        sphere_heat_series(BundleData(KahlerModel.plane(1.0)), 1.0, 1.0, x, y)
    with pytest.raises(PrecisionError):
        sphere_heat_series(b, 1.0, 1e-12, x, y)


def test_plane_rule_tail_is_reported():
    b = BundleData(KahlerModel.plane(1.0))
    rule = plane_rule(b, 40, 16, cutoff_R=2.0, max_power=4)
    assert rule.meta["tail"] > 1e-3
    with pytest.raises(PrecisionError):
        gram_matrix(BasisSpec(b, N=4, cutoff_R=2.0))


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_kernel_diagonal_positive(a, c):
    basis = BasisSpec(BundleData(KahlerModel.plane(1.0)), N=24).orthonormalize()
    p = ChartPoint(0, (a, c))
    K = kernel_series(basis, p, p)
    assert K.value.real > 0 and abs(K.value.imag) < 1e-12 * K.value.real
