"""Margins of the continuity envelope as the size of the conformal factor grows."""
import argparse

import numpy as np

from kohnlap import catalog
from kohnlap.acceptance import random_real_function, scaled_to_sup
from kohnlap.deformation import continuity_bound_check
from kohnlap.functions import FunctionRep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sups", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.2, 0.4])
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    st, basis = catalog.deformed_sphere(1, FunctionRep.constant(2, 0.0)).setup(2, 2)
    print("sup_u  delta  delta_prime  min_lower_margin  min_upper_margin  passed")
    for s in args.sups:
        for _ in range(args.trials):
            u = scaled_to_sup(random_real_function(2, 2, rng), st.rule, s)
            rep = continuity_bound_check(st, u, basis, range(1, 9))
            lo = min(r["lower_margin"] for r in rep.rows)
            hi = min(r["upper_margin"] for r in rep.rows)
            print(f"{s:5.2f}  {rep.delta:.3f}  {rep.delta_prime:.3f}  {lo:+.4f}  {hi:+.4f}  {rep.passed}")


if __name__ == "__main__":
    main()
