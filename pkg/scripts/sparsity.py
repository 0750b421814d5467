"""Procrustes error of V for KELP and the baseline at two one-fractions.

The intercept is solved so the expected fraction of ones hits each target.

    python3 scripts/sparsity.py --n 200 --p 2000 --targets 0.23 0.10 --seeds 5
"""
import argparse
import sys

from kelp import FitConfig, KernelSpec, SimConfig, procrustes_error
from kelp.optimizer import basis_for_config, pgd_fit
from kelp.simulation import gen_ground_truth, gen_semantic_embeddings, rho_for_sparsity, sample_matrix


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=int, default=2000)
    ap.add_argument("--rank", type=int, default=8)
    ap.add_argument("--targets", type=float, nargs="+", default=[0.23, 0.10])
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args(argv)

    configs = {"kelp": FitConfig(r=args.rank, kernel=KernelSpec.linear(), delta=1e-9),
               "baseline": FitConfig(r=args.rank, kernel=KernelSpec.baseline())}
    print("seed\ttarget\trho\tone_fraction\tkelp_V_error\tbaseline_V_error")
    for seed in range(args.seeds):
        cfg = SimConfig(n=args.n, p=args.p, r=args.rank, seed=seed)
        E, _ = gen_semantic_embeddings(cfg)
        truth = gen_ground_truth(cfg, E)
        for target in args.targets:
            t = truth.with_rho(rho_for_sparsity(truth, target))
            Y = sample_matrix(t, seed)
            errs = [procrustes_error(pgd_fit(Y, basis_for_config(c, E), c).params.V, t.V_star)
                    for c in configs.values()]
            print(f"{seed}\t{target}\t{t.rho_star:.4f}\t{Y.sparsity:.4f}\t{errs[0]:.4f}\t{errs[1]:.4f}",
                  flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
