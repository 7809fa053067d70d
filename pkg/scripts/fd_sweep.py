"""Randomised finite-difference sweep over instance sizes.

Prints, per quantity, the worst relative error at the main step and the
range of O(h^2) decay ratios, for double- and extended-precision oracles.

    python scripts/fd_sweep.py --instances 100 --max-m 12
"""
import argparse

import numpy as np

from qrderiv.fd import QUANTITIES, FDConfig, check_all


def sweep(n_instances, max_m, seed, extended):
    rng = np.random.default_rng(seed)
    cfg = FDConfig(extended_precision=extended)
    rel = {q: [] for q in QUANTITIES}
    ratio = {q: [] for q in QUANTITIES}
    for _ in range(n_instances):
        m = int(rng.integers(2, max_m + 1))
        n = int(rng.integers(1, m))
        rep = check_all(rng.standard_normal((m, n)), rng.standard_normal((m, n)), cfg)
        for c in rep.checks:
            rel[c.name].append(c.rel_err)
            ratio[c.name].append(c.decay_ratio)
    return rel, ratio


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--max-m", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    for extended in (False, True):
        rel, ratio = sweep(args.instances, args.max_m, args.seed, extended)
        print(f"\noracle precision: {'extended' if extended else 'double'}")
        print(f"{'quantity':<8}{'max rel err':>14}{'min ratio':>12}{'max ratio':>12}{'in [50,200]':>14}")
        for q in QUANTITIES:
            r = np.array(ratio[q])
            inside = np.mean((r >= 50) & (r <= 200))
            print(f"{q:<8}{max(rel[q]):>14.2e}{r.min():>12.1f}{r.max():>12.1f}{inside:>14.0%}")


if __name__ == "__main__":
    main()
