"""How well does a + b/D describe the finite-D kernel on the plane?

For f = 0 at x = y = 0 the finite-D diagonal is known in closed form,
Q_D = (B / 2 pi) / (1 - exp(-2 D B t)) with B = 1 / (2 hbar), and the lattice
oracle reproduces it.  Convergence to the reproducing kernel B / 2 pi is
exponential in D, so the two-parameter 1/D fit over D in {4, 8, 16, 32}
leaves a bias that depends on D B t.  This prints the bias of the fitted limit
for several hbar, from the lattice oracle and from the closed form.
"""
import argparse

from bergmc.bergman import BasisSpec, kernel_series
from bergmc.bundle import BundleData
from bergmc.errors import PrecisionError
from bergmc.dk import DLadder, dk_extrapolate, oracle_ladder
from bergmc.geometry import ChartPoint, KahlerModel
from bergmc.magnetic import mehler_diagonal


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--hbar", type=float, nargs="*", default=[0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--lattice", action="store_true", help="also run the lattice oracle (minutes per hbar; slowest for small hbar)")
    args = ap.parse_args()
    Ds = (4.0, 8.0, 16.0, 32.0)
    o = ChartPoint(0, (0.0, 0.0))
    print(f"{'hbar':>6} {'K(0,0)':>10} {'closed-form fit':>16} {'rel. error':>11} {'lattice rel. error':>19}")
    for hbar in args.hbar:
        b = BundleData(KahlerModel.plane(hbar))
        K = kernel_series(BasisSpec(b, N=16).orthonormalize(), o, o).value.real
        closed = dk_extrapolate(DLadder(list(Ds), [mehler_diagonal(b, D, args.t) for D in Ds], [0.0] * 4))
        line = f"{hbar:6.2f} {K:10.6f} {closed.limit.real:16.6f} {abs(closed.limit - K) / K:11.2e}"
        if args.lattice:
            try:
                lat = dk_extrapolate(oracle_ladder(b, None, args.t, o, o, Ds))
                line += f" {abs(lat.limit - K) / K:19.2e}"
            except PrecisionError:
                line += f" {'not converged':>19}"
        print(line)


if __name__ == "__main__":
    main()
