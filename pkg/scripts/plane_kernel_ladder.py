"""Monte Carlo D-ladder for the plane kernel next to the lattice oracle; writes a CSV.

Shows the sign problem directly: the relative standard error grows with D
because the holonomy phase averages to D B t / sinh(D B t) while the analytic
prefactor grows like exp(D B t).
"""
import argparse
from pathlib import Path

from bergmc.bergman import BasisSpec, kernel_series
from bergmc.bundle import BundleData
from bergmc.dk import DLadder, MCConfig, dk_extrapolate, finite_d_kernel
from bergmc.geometry import ChartPoint, KahlerModel
from bergmc.magnetic import magnetic_oracle_plane
from bergmc.store import write_ladder_csv
from bergmc.symbols import SymbolSpec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--D", type=float, nargs="*", default=[1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    ap.add_argument("--out", default="results/plane_kernel_ladder.csv")
    args = ap.parse_args()
    b = BundleData(KahlerModel.plane(1.0))
    o = ChartPoint(0, (0.0, 0.0))
    ests = []
    print(f"{'D':>5} {'MC':>12} {'stderr':>9} {'rel':>8} {'lattice':>12}")
    for D in args.D:
        e = finite_d_kernel(b, SymbolSpec.zero(), D, args.t, o, o, MCConfig(args.paths, args.steps))
        ref = magnetic_oracle_plane(b, D, args.t, o, o).value.real
        print(f"{D:5g} {e.value.real:12.6f} {e.stderr:9.2e} {e.stderr / abs(e.value):8.1e} {ref:12.6f}")
        ests.append(e)
    lad = DLadder.from_estimates(ests)
    fit = dk_extrapolate(lad) if len(ests) >= 3 else None
    K = kernel_series(BasisSpec(b, N=16).orthonormalize(), o, o).value.real
    if fit:
        print(f"a + b/D limit {fit.limit.real:.6f} +- {fit.stderr:.2e}; reproducing kernel {K:.6f}")
    out = write_ladder_csv(Path(args.out), lad.D, lad.values, lad.stderr, (fit.limit, fit.stderr) if fit else None)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
