#!/usr/bin/env python3
"""Peak memory and wall time of DDGF and EM fitting against event count.

The grid is fixed (5 km disc, 0.25 km, 400 days), so DDGF memory should not
move with the event count while EM memory and time grow with the number of
candidate pairs.
"""

import argparse

from sepp_green.experiments import cost_catalog, ddgf_cost, em_cost, loglog_slope

MB = 2 ** 20


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ddgf-sizes", type=int, nargs="+", default=[10_000, 20_000, 40_000])
    ap.add_argument("--em-sizes", type=int, nargs="+", default=[5_000, 10_000, 20_000])
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    print("method  events  peak_MB  seconds  pairs")
    ddgf = [ddgf_cost(cost_catalog(n, seed=args.seed)) for n in args.ddgf_sizes]
    for s in ddgf:
        print(f"ddgf    {s.n_events:6d}  {s.peak_bytes / MB:7.1f}  {s.seconds:7.2f}")
    em = [em_cost(cost_catalog(n, seed=args.seed)) for n in args.em_sizes]
    for s in em:
        print(f"em      {s.n_events:6d}  {s.peak_bytes / MB:7.1f}  {s.seconds:7.2f}  {s.extras['n_pairs']}")

    ns = [s.n_events for s in ddgf]
    print(f"ddgf log-log slopes: memory {loglog_slope(ns, [s.peak_bytes for s in ddgf]):.2f}, "
          f"time {loglog_slope(ns, [s.seconds for s in ddgf]):.2f}")
    ns = [s.n_events for s in em]
    print(f"em   log-log slopes: memory {loglog_slope(ns, [s.peak_bytes for s in em]):.2f}, "
          f"time {loglog_slope(ns, [s.seconds for s in em]):.2f}")


if __name__ == "__main__":
    main()
