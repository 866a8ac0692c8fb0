import numpy as np
import pytest
from scipy.linalg import eigvalsh

from bergmc.bundle import BundleData
from bergmc.errors import DomainError, UnsupportedModelError
from bergmc.geometry import ChartPoint, KahlerModel
from bergmc.magnetic import build_lattice, magnetic_oracle_plane, mehler_diagonal
from bergmc.symbols import SymbolSpec


def test_diagonal_matches_mehler_formula(plane):
    o = ChartPoint(0, (0.0, 0.0))
    for D, t in ((1.0, 0.5), (4.0, 1.0)):
        v = magnetic_oracle_plane(plane, D, t, o, o)
        assert v.value.real == pytest.approx(mehler_diagonal(plane, D, t), rel=1e-5)
        assert abs(v.value.imag) < 1e-12


def test_hermiticity(plane):
    x, y = ChartPoint(0, (0.2, 0.4)), ChartPoint(0, (-0.4, 0.2))
    a = magnetic_oracle_plane(plane, 1.0, 0.5, x, y, SymbolSpec.abs2())
    b = magnetic_oracle_plane(plane, 1.0, 0.5, y, x, SymbolSpec.abs2())
    assert abs(a.value - np.conj(b.value)) < 1e-10
    assert a.invariant == pytest.approx(abs(a.value) ** 2 * np.exp(-plane.phi(x.z) - plane.phi(y.z)))


def test_decreases_in_D_toward_bergman_kernel(plane):
    o = ChartPoint(0, (0.0, 0.0))
    vals = [magnetic_oracle_plane(plane, D, 1.0, o, o).value.real for D in (4.0, 8.0, 16.0)]
    assert vals[0] > vals[1] > vals[2] > 1 / (4 * np.pi)
    assert vals[2] - 1 / (4 * np.pi) < 1e-5


def test_lattice_trace_decreases_in_t(plane):
    lat = build_lattice(plane, 1.0, 0.8, 4.0, SymbolSpec.abs2())
    ev = eigvalsh(lat.H.toarray())
    assert lat.lo - 1e-9 <= ev.min() and ev.max() <= lat.hi + 1e-9
    traces = [np.exp(-t * ev).sum() for t in (0.1, 0.2, 0.4, 0.8)]
    assert all(a > b for a, b in zip(traces, traces[1:]))


def test_errors(plane):
    with pytest.raises(DomainError):
        magnetic_oracle_plane(plane, 1.0, 0.5, ChartPoint(0, (0.13, 0.0)), ChartPoint(0, (0.0, 0.0)))
    with pytest.raises(UnsupportedModelError):
        magnetic_oracle_plane(BundleData(KahlerModel.sphere(1)), 1.0, 0.5, ChartPoint(0, (0, 0)), ChartPoint(0, (0, 0)))
    with pytest.raises(UnsupportedModelError):
        magnetic_oracle_plane(plane, 1.0, 0.5, ChartPoint(0, (0, 0)), ChartPoint(0, (0, 0)), SymbolSpec.cos_theta())
