"""One-sided eigenvalue slopes against Q_f spectra for random mean-zero directions on S^3."""
import argparse

import numpy as np

from kohnlap import catalog
from kohnlap.acceptance import random_real_function
from kohnlap.deformation import eigen_branches, make_path, verify_slopes
from kohnlap.functions import FunctionRep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--kmax", type=int, default=8)
    ap.add_argument("--h", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    st, basis = catalog.deformed_sphere(1, FunctionRep.constant(2, 0.0)).setup(2, 2)
    print("trial  k  clause  left  right  qf_min  qf_max  passed")
    for trial in range(args.trials):
        path = make_path(st, random_real_function(2, 2, rng, scale=0.5), normalize=True)
        for br in eigen_branches(path, range(1, args.kmax + 1), basis, args.h):
            rep = verify_slopes(path, br.k, basis, args.h, branch=br)
            ev = rep.qf_eigenvalues
            print(f"{trial:5d} {br.k:2d} {rep.clause:>8s} {rep.left_slope:+.6f} {rep.right_slope:+.6f} "
                  f"{ev.min():+.6f} {ev.max():+.6f} {rep.passed}")


if __name__ == "__main__":
    main()
