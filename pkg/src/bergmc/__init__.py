"""Path-integral estimators for Berezin-Toeplitz semigroups on the plane and the sphere."""
from .bergman import BasisSpec, kernel_series, toeplitz_matrix
from .bundle import BundleData, prequantum_residual, rho_at
from .dk import MCConfig, DLadder, dk_extrapolate, finite_d_kernel, finite_d_matrix, finite_d_matrix_element
from .geometry import ChartPoint, KahlerModel
from .magnetic import magnetic_oracle_plane
from .paths import SeedSpec, TimeGrid, semigroup_apply
from .symbols import SymbolSpec

__version__ = "0.1.0"

__all__ = [
    "BasisSpec", "BundleData", "ChartPoint", "DLadder", "KahlerModel", "MCConfig", "SeedSpec", "SymbolSpec",
    "TimeGrid", "dk_extrapolate", "finite_d_kernel", "finite_d_matrix", "finite_d_matrix_element",
    "kernel_series", "magnetic_oracle_plane", "prequantum_residual", "rho_at", "semigroup_apply",
    "toeplitz_matrix",
]
