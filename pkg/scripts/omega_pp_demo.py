"""How wrong is dQ_mp if the Omega_pp block is taken to be zero?

For random tall matrices, compares the Householder dQ_mp with the value
obtained from Q_mm [Omega_np; 0], and reports ||Omega_pp|| alongside.

    python scripts/omega_pp_demo.py --m 10 --n 6 --trials 10
"""
import argparse

import numpy as np

from qrderiv.derivatives import qr_derivative


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    if args.m - args.n < 2:
        p.error("need p = m - n >= 2 for a nontrivial Omega_pp")

    rng = np.random.default_rng(args.seed)
    n = args.n
    print(f"{'trial':>5}{'|Omega_pp|':>14}{'|Omega_mm|':>14}{'rel err (Omega_pp=0)':>24}")
    for t in range(args.trials):
        A = rng.standard_normal((args.m, n))
        dA = rng.standard_normal((args.m, n))
        _, _, Q, _, full = qr_derivative(A, dA)
        om = full.omega
        dQmp_zero_block = Q @ np.vstack([-om.Omega_pn.T, np.zeros_like(om.Omega_pp)])
        err = np.linalg.norm(dQmp_zero_block - full.dQ_mp) / np.linalg.norm(full.dQ_mp)
        print(f"{t:>5}{np.linalg.norm(om.Omega_pp):>14.4f}{np.linalg.norm(om.assemble()):>14.4f}{err:>24.3f}")


if __name__ == "__main__":
    main()
