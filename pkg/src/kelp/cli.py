"""Command-line entry point: ``kelp <subcommand> [flags]``.

Every subcommand writes its outputs under ``--out-dir`` and echoes a flat
``key=value`` summary on stdout. Failures print one ``error: ...`` line on
stderr and exit nonzero (2 for bad flags, 1 otherwise).
"""
from __future__ import annotations

import argparse
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .evaluation import MetricsReport, completion_eval, procrustes_error, relative_theta_error
from .kernel import DEFAULT_CANDIDATES, KernelSpec, load_basis, nystrom_features, save_basis
from .matrix_io import (format_float, load_binary_matrix, load_embeddings, load_mask,
                        save_binary_matrix, save_embeddings)
from .model import FitConfig, extend_embedding, load_params, logits, save_params
from .optimizer import FitDivergedError, basis_for_config, pgd_fit
from .selection import select_kernel
from .simulation import (SimConfig, gen_ground_truth, gen_semantic_embeddings, load_truth,
                         rho_for_sparsity, sample_matrix, save_truth)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _echo(pairs):
    for k, v in pairs:
        if isinstance(v, float):
            v = format_float(v)
        print(f"{k}={v}")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    return out


def _kernel(text):
    try:
        return KernelSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _kernel_list(text):
    return [_kernel(tok) for tok in text.split(",") if tok.strip()]


def _box(text):
    try:
        M, M1, M2 = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--box-bounds expects M,M1,M2") from None
    return (M, M1, M2)


def _fit_config(args, kernel) -> FitConfig:
    if args.q is not None and args.energy is not None:
        raise UsageError("pass at most one of --q and --energy")
    energy = 0.95 if args.energy is None else args.energy
    if args.q is None and not 0 < energy < 1:
        raise UsageError("--energy must lie in (0, 1)")
    try:
        return FitConfig(r=args.rank, kernel=kernel, q=args.q, delta=1.0 - energy,
                         eta=args.eta, max_iters=args.iters, tol=args.tol,
                         box=args.box_bounds, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _embeddings_for(kernels, path):
    if all(k.is_baseline for k in kernels):
        return None if path is None else load_embeddings(path)
    if path is None:
        raise UsageError("--embeddings is required unless every kernel is 'baseline'")
    return load_embeddings(path)


def cmd_simulate(args):
    try:
        config = SimConfig(n=args.n, p=args.p, d=args.d, K=args.clusters, r=args.rank,
                           mapping=args.mapping, rho_star=args.rho, perturb=args.perturb,
                           seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.target_sparsity is not None and not 0 < args.target_sparsity < 1:
        raise UsageError("--target-sparsity must lie in (0, 1)")
    out = _out_dir(args)
    E, clusters = gen_semantic_embeddings(config)
    truth = gen_ground_truth(config, E)
    if args.target_sparsity is not None:
        truth = truth.with_rho(rho_for_sparsity(truth, args.target_sparsity))
    Y = sample_matrix(truth, args.seed if args.sample_seed is None else args.sample_seed)
    save_binary_matrix(Y, out / "matrix.txt")
    save_embeddings(E, out / "embeddings.csv")
    save_truth(truth, out / "truth.json")
    (out / "clusters.txt").write_text("".join(f"{z}\n" for z in clusters.tolist()))
    _echo([("n", Y.n), ("p", Y.p), ("rank", config.r), ("mapping", config.mapping),
           ("rho_star", truth.rho_star), ("sparsity", Y.sparsity),
           ("expected_sparsity", truth.expected_sparsity()), ("out_dir", str(out))])


def cmd_fit(args):
    config = _fit_config(args, args.kernel)
    E = _embeddings_for([args.kernel], args.embeddings)
    Y = load_binary_matrix(args.matrix)
    mask = load_mask(args.mask) if args.mask else None
    out = _out_dir(args)
    basis = basis_for_config(config, E)
    result = pgd_fit(Y, basis, config, mask=mask)
    save_params(result.params, out / "model.json")
    (out / "trace.txt").write_text("".join(format_float(v) + "\n" for v in result.objective_trace))
    if basis is not None:
        save_basis(basis, out / "basis.json")
    _echo([("kernel", str(config.kernel)), ("q", "none" if basis is None else basis.q),
           ("iterations", result.iterations_run), ("converged", result.converged),
           ("objective", float(result.objective_trace[-1])), ("out_dir", str(out))])


def cmd_select_kernel(args):
    candidates = args.candidates or list(DEFAULT_CANDIDATES)
    config = _fit_config(args, candidates[0])
    if not 0 < args.pi < 1:
        raise UsageError("--pi must lie in (0, 1)")
    E = _embeddings_for(candidates, args.embeddings)
    Y = load_binary_matrix(args.matrix)
    out = _out_dir(args)
    report = select_kernel(Y, E, candidates, pi=args.pi, config=config, seed=args.seed,
                           refit=args.refit)
    report.save(out / "selection.json")
    if report.final_fit is not None:
        save_params(report.final_fit.params, out / "model.json")
    pairs = [("chosen", report.chosen), ("chosen_kernel", str(report.best.kernel)),
             ("pi", report.pi), ("n_heldout", report.mask.size)]
    for k, c in enumerate(report.candidates):
        pairs += [(f"candidate{k}_kernel", str(c.kernel)),
                  (f"candidate{k}_q", "none" if c.q is None else c.q),
                  (f"candidate{k}_holdout_loss", c.holdout_loss)]
    _echo(pairs)


def cmd_evaluate(args):
    params = load_params(args.model)
    truth = load_truth(args.truth)
    out = _out_dir(args)
    kw = {"rel_theta_error": relative_theta_error(logits(params), truth["Theta_star"])}
    if "U_star" in truth:
        kw["rel_U_error"] = procrustes_error(params.U, truth["U_star"])
    if "V_star" in truth:
        kw["rel_V_error"] = procrustes_error(params.V, truth["V_star"])
    if args.matrix:
        kw["sparsity"] = load_binary_matrix(args.matrix).sparsity
    report = MetricsReport(**kw)
    report.save(out / "metrics.txt")
    _echo(report.items())


def cmd_extend(args):
    params = load_params(args.model)
    if params.kernel is None or params.kernel.is_baseline:
        raise ValueError("baseline models have no kernel basis to extend from")
    basis = load_basis(args.basis)
    E_new = load_embeddings(args.new_embeddings)
    out = _out_dir(args)
    V_new = extend_embedding(params, basis, nystrom_features(basis, E_new.values, params.kernel))
    text = "\n".join(",".join(format_float(x) for x in row) for row in np.atleast_2d(V_new).tolist())
    (out / "extended.csv").write_text(text + "\n")
    _echo([("n_new", E_new.p), ("rank", params.r), ("out_dir", str(out))])


def cmd_complete(args):
    config = _fit_config(args, args.kernel)
    if not 0 < args.mask_frac < 1:
        raise UsageError("--mask-frac must lie in (0, 1)")
    E = _embeddings_for([args.kernel], args.embeddings)
    Y = load_binary_matrix(args.matrix)
    out = _out_dir(args)
    report = completion_eval(Y, E, args.kernel, mask_frac=args.mask_frac, config=config,
                             seed=args.seed)
    report.save(out / "metrics.txt")
    _echo(report.items())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kelp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def shared(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default=".")
        p.add_argument("--threads", type=int, default=None,
                       help="cap on BLAS worker threads")

    def fitting(p, kernel=True):
        p.add_argument("--matrix", required=True)
        p.add_argument("--embeddings")
        if kernel:
            p.add_argument("--kernel", type=_kernel, default=KernelSpec.linear(),
                           help="linear | gaussian:<gamma> | poly:<degree>:<offset> | baseline")
        p.add_argument("--rank", type=int, default=8)
        p.add_argument("--energy", type=float, default=None,
                       help="retained kernel PCA energy (default 0.95)")
        p.add_argument("--q", type=int, default=None, help="fixed kernel PCA dimension")
        p.add_argument("--eta", type=float, default=0.5)
        p.add_argument("--iters", type=int, default=2000)
        p.add_argument("--tol", type=float, default=1e-7)
        p.add_argument("--box-bounds", type=_box, default=None, metavar="M,M1,M2")

    p = sub.add_parser("simulate", help="generate a synthetic data set")
    shared(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--mapping", choices=("linear", "tanh"), default="linear")
    p.add_argument("--rho", type=float, default=-1.5)
    p.add_argument("--perturb", type=float, default=0.05)
    p.add_argument("--target-sparsity", type=float, default=None,
                   help="solve for the intercept giving this expected fraction of ones")
    p.add_argument("--sample-seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit KELP or the baseline")
    shared(p)
    fitting(p)
    p.add_argument("--mask", help="coordinate file of held-out entries")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select-kernel", help="hold-out kernel selection")
    shared(p)
    fitting(p, kernel=False)
    p.add_argument("--candidates", type=_kernel_list, default=None,
                   help="comma-separated kernels (default: linear and three gaussians plus baseline)")
    p.add_argument("--pi", type=float, default=0.1)
    p.add_argument("--refit", action="store_true", help="refit the winner on all entries")
    p.set_defaults(func=cmd_select_kernel)

    p = sub.add_parser("evaluate", help="estimation errors against a truth bundle")
    shared(p)
    p.add_argument("--model", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--matrix")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("extend", help="embed unseen columns from their semantic embeddings")
    shared(p)
    p.add_argument("--model", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--new-embeddings", required=True)
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("complete", help="masked completion AuROC")
    shared(p)
    fitting(p)
    p.add_argument("--mask-frac", type=float, default=0.2)
    p.set_defaults(func=cmd_complete)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        if args.threads is not None:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=args.threads)
        else:
            limiter = nullcontext()
        with limiter:
            args.func(args)
    except UsageError as exc:
        print(f"error: usage: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except FitDivergedError as exc:
        print(f"error: diverged: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
