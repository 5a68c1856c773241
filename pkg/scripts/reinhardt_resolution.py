"""Resolution study for the Reinhardt eigenvalue n/(2 r^2).

This is how the default chart resolution was chosen.
"""
import argparse

from kohnlap import catalog
from kohnlap.spectral import residual_check, spectrum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=float, nargs="+", default=[1.0, 2.0])
    ap.add_argument("--polar", type=int, nargs="+", default=[8, 16, 24, 32])
    ap.add_argument("--phase", type=int, nargs="+", default=[8, 16, 24])
    args = ap.parse_args()
    print("r  polar  phase  lambda  rel_err  residual")
    for r in args.r:
        entry = catalog.reinhardt(1, r)
        target = 1 / (2 * r * r)
        for a in args.polar:
            for b in args.phase:
                st, basis = entry.setup(1, 1, resolution=(a, b, b))
                res, _ = spectrum(st, basis)
                c = min(res.clusters, key=lambda c: abs(c.value - target))
                resid = max(residual_check(st, basis, res, m + 1) for m in c.members)
                print(f"{r:g}  {a:5d}  {b:5d}  {c.value:.10f}  {abs(c.value - target) / target:.1e}  {resid:.1e}")


if __name__ == "__main__":
    main()
