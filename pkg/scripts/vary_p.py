"""Relative Theta error of KELP and the baseline as the column count grows.

Prints one tab-separated row per (p, seed) and a median summary per p.

    python3 scripts/vary_p.py --n 100 --p 500 1000 2000 --seeds 5
"""
import argparse
import sys

import numpy as np

from kelp import FitConfig, KernelSpec, SimConfig, logits, relative_theta_error, simulate
from kelp.optimizer import basis_for_config, pgd_fit


def fit_error(Y, truth, config):
    basis = basis_for_config(config, truth.E)
    return relative_theta_error(logits(pgd_fit(Y, basis, config).params), truth.Theta_star)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--p", type=int, nargs="+", default=[500, 1000, 2000])
    ap.add_argument("--rank", type=int, default=4)
    ap.add_argument("--mapping", choices=("linear", "tanh"), default="linear")
    ap.add_argument("--kernel", type=KernelSpec.parse, default=KernelSpec.linear())
    ap.add_argument("--energy", type=float, default=1 - 1e-9)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args(argv)

    kelp_cfg = FitConfig(r=args.rank, kernel=args.kernel, delta=1 - args.energy)
    base_cfg = FitConfig(r=args.rank, kernel=KernelSpec.baseline())
    print("p\tseed\tkelp\tbaseline")
    medians = []
    for p in args.p:
        rows = []
        for seed in range(args.seeds):
            Y, truth = simulate(SimConfig(n=args.n, p=p, r=args.rank, mapping=args.mapping, seed=seed))
            rows.append((fit_error(Y, truth, kelp_cfg), fit_error(Y, truth, base_cfg)))
            print(f"{p}\t{seed}\t{rows[-1][0]:.4f}\t{rows[-1][1]:.4f}", flush=True)
        medians.append(np.median(rows, axis=0))
    print("\np\tmedian_kelp\tmedian_baseline")
    for p, (k, b) in zip(args.p, medians):
        print(f"{p}\t{k:.4f}\t{b:.4f}")
    if len(args.p) > 1:
        x = np.log(args.p)
        slopes = [np.polyfit(x, np.log([m[j] for m in medians]), 1)[0] for j in (0, 1)]
        print(f"\nlog-log slope: kelp {slopes[0]:.3f}, baseline {slopes[1]:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
