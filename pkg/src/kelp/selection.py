"""Hold-out likelihood selection among candidate kernels and the baseline."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .kernel import KernelSpec
from .matrix_io import BinaryMatrix, EntryMask, sample_holdout_mask
from .model import FitConfig, _dense, logits, nll_from_logits
from .optimizer import FitResult, basis_for_config, pgd_fit


@dataclass(frozen=True, eq=False)
class Candidate:
    kernel: KernelSpec
    q: Optional[int]
    holdout_loss: float
    iterations: int
    converged: bool
    fit: FitResult


@dataclass(frozen=True, eq=False)
class SelectionReport:
    candidates: list
    chosen: int
    pi: float
    seed: int
    mask: EntryMask
    final_fit: Optional[FitResult] = None

    @property
    def best(self) -> Candidate:
        return self.candidates[self.chosen]

    def to_dict(self) -> dict:
        return {
            "pi": self.pi,
            "seed": self.seed,
            "n_heldout": self.mask.size,
            "chosen": self.chosen,
            "chosen_kernel": str(self.best.kernel),
            "candidates": [
                {"kernel": str(c.kernel), "q": c.q, "holdout_loss": c.holdout_loss,
                 "iterations": c.iterations, "converged": c.converged}
                for c in self.candidates
            ],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def holdout_loss(fit: FitResult, Y, mask: EntryMask) -> float:
    """Negative log-likelihood restricted to the held-out entries."""
    Yd = _dense(Y)
    return nll_from_logits(logits(fit.params), Yd, mask.to_dense().astype(float))


def select_kernel(Y: BinaryMatrix, E, candidates: Sequence[KernelSpec], pi: float = 0.1,
                  config: Optional[FitConfig] = None, seed: int = 0,
                  refit: bool = False, attempts: int = 10) -> SelectionReport:
    """Fit every candidate on one shared random mask and keep the best hold-out loss.

    Ties go to the earlier candidate. With ``refit`` the winner is fitted again
    on all entries and attached as ``final_fit``.
    """
    if not candidates:
        raise ValueError("no candidate kernels given")
    config = FitConfig() if config is None else config
    Yd = _dense(Y)
    n, p = Yd.shape
    for k in range(attempts):
        mask = sample_holdout_mask(n, p, pi, seed + k)
        if mask.size > 0:
            break
    else:
        raise ValueError(f"hold-out mask stayed empty for {attempts} seeds")

    results = []
    for spec in candidates:
        cfg = replace(config, kernel=spec)
        basis = basis_for_config(cfg, E)
        fit = pgd_fit(Yd, basis, cfg, mask=mask)
        results.append(Candidate(kernel=spec, q=None if basis is None else basis.q,
                                 holdout_loss=holdout_loss(fit, Yd, mask),
                                 iterations=fit.iterations_run, converged=fit.converged,
                                 fit=fit))
    losses = np.array([c.holdout_loss for c in results])
    chosen = int(np.argmin(losses))

    final = None
    if refit:
        cfg = replace(config, kernel=results[chosen].kernel)
        final = pgd_fit(Yd, basis_for_config(cfg, E), cfg)
    return SelectionReport(candidates=results, chosen=chosen, pi=pi, seed=seed + k,
                           mask=mask, final_fit=final)
