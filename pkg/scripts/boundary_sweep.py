"""Noise-grid sweep: solver verdicts against the analytic compatibility region.

    python scripts/boundary_sweep.py --d 3 --grid 21 --jobs 4 --out boundary_d3.csv
"""
import argparse
import csv
import sys
import time

from weylcomp import channel, compat
from weylcomp.cli import boundary_rows


def symmetric_threshold(d, lo=0.0, hi=1.0, width=1e-3):
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        p = channel.noise_mix(0, mid, d).p
        status = compat.feasibility(p, p).status
        if status == compat.FEASIBLE:
            hi = mid
        elif status == compat.INFEASIBLE:
            lo = mid
        else:
            break
    return lo, hi


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--grid", type=int, default=21)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--band", type=float, default=0.02)
    ap.add_argument("--out")
    args = ap.parse_args()

    t0 = time.perf_counter()
    rows = boundary_rows(args.d, args.grid, compat.FeasibilityOptions(), args.jobs)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=["s", "t", "status", "residual", "gap", "margin"])
    w.writeheader()
    w.writerows(rows)
    if args.out:
        fh.close()

    outside = [r for r in rows if abs(r["margin"]) > args.band]
    bad = [r for r in outside if r["status"] != ("feasible" if r["margin"] > 0 else "infeasible")]
    lo, hi = symmetric_threshold(args.d)
    print(f"d={args.d}: {len(outside)} points outside the band, {len(bad)} mismatches", file=sys.stderr)
    print(f"symmetric threshold in [{lo:.4f}, {hi:.4f}], closed form {args.d / (2 * (args.d + 1)):.4f}", file=sys.stderr)
    print(f"{time.perf_counter() - t0:.1f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
