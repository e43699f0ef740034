"""Audit of the Gaussian necessary inequality (factor 1 vs factor 2) against the block condition.

    python scripts/gaussian_audit.py --pairs 200 --N 1
"""
import argparse

from weylcomp import gaussian
from weylcomp.cli import dumps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--N", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(dumps(gaussian.necessary_audit(n_pairs=args.pairs, N=args.N, seed=args.seed), indent=1))


if __name__ == "__main__":
    main()
