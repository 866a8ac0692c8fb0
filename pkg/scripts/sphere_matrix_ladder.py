"""Sphere matrix elements <eta_a, exp(-t S_D) eta_b> along a D ladder versus exp(-t T_f)."""
import argparse

import numpy as np

from bergmc.bergman import BasisSpec, semigroup_matrix, toeplitz_matrix
from bergmc.bundle import BundleData
from bergmc.dk import MCConfig, finite_d_matrix
from bergmc.geometry import KahlerModel
from bergmc.symbols import SymbolSpec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--nodes", type=int, nargs=2, default=(10, 20))
    ap.add_argument("--D", type=float, nargs="*", default=[0.5, 1.0, 2.0, 4.0, 8.0])
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    b = BundleData(KahlerModel.sphere(args.k))
    basis = BasisSpec(b).orthonormalize()
    f = SymbolSpec.cos_theta()
    E = semigroup_matrix(toeplitz_matrix(f, basis), args.t)
    print("diag exp(-t T_f):", np.array2string(np.real(np.diag(E)), precision=5))
    for D in args.D:
        m = finite_d_matrix(b, f, D, args.t, basis, MCConfig(args.paths, args.steps, workers=args.workers),
                            tuple(args.nodes))
        dev = np.abs(m.values - E).max()
        print(f"D = {D:5g}: diag {np.array2string(np.real(np.diag(m.values)), precision=5)}  "
              f"max|M_D - exp(-tT)| = {dev:.3e}  max stderr = {m.stderr.max():.2e}")


if __name__ == "__main__":
    main()
