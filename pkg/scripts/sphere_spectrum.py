"""Sphere spectra against q(p+n) for growing basis degree."""
import argparse
import time

from kohnlap import catalog
from kohnlap.spectral import spectrum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--max-deg", type=int, default=3)
    args = ap.parse_args()
    entry = catalog.sphere(args.n)
    print("P=Q  basis  nodes  max_rel_err  multiplicities_ok  seconds")
    for d in range(1, args.max_deg + 1):
        t0 = time.perf_counter()
        st, basis = entry.setup(d, d)
        res, _ = spectrum(st, basis)
        expected = catalog.sphere_spectrum(args.n, d, d)
        got = {round(c.value, 6): c.multiplicity for c in res.clusters}
        err = max(abs(c.value - round(c.value)) / round(c.value) for c in res.clusters)
        ok = got == {float(k): v for k, v in expected.items()}
        print(f"{d:3d}  {len(basis):5d}  {len(st.rule):5d}  {err:11.2e}  {str(ok):17s}  {time.perf_counter() - t0:.2f}")


if __name__ == "__main__":
    main()
