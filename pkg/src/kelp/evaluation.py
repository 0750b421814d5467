"""Estimation-error metrics and the masked-completion AuROC protocol."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .matrix_io import BinaryMatrix, sample_holdout_mask
from .model import FitConfig, logits, sigmoid
from .optimizer import basis_for_config, pgd_fit


@dataclass(frozen=True)
class MetricsReport:
    rel_theta_error: Optional[float] = None
    rel_U_error: Optional[float] = None
    rel_V_error: Optional[float] = None
    auroc: Optional[float] = None
    sparsity: Optional[float] = None
    n_heldout: Optional[int] = None
    seed: Optional[int] = None

    def items(self):
        return [(k, v) for k, v in asdict(self).items() if v is not None]

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in self.items())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def relative_theta_error(est, truth) -> float:
    est, truth = np.asarray(est, dtype=float), np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise ValueError("truth matrix is zero")
    return float(np.linalg.norm(est - truth) / denom)


def procrustes_rotation(est, truth) -> np.ndarray:
    """Orthogonal ``O`` minimizing ``|est - truth O|_F`` (reflections allowed)."""
    W, _, Zt = np.linalg.svd(truth.T @ est)
    return W @ Zt


def procrustes_error(est, truth) -> float:
    est = np.atleast_2d(np.asarray(est, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise ValueError("truth factor is zero")
    O = procrustes_rotation(est, truth)
    return float(np.linalg.norm(est - truth @ O) / denom)


def auroc(scores, labels) -> float:
    """Mann-Whitney estimate of P(positive scores above negative), ties count half."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    if not np.all(pos | (labels == 0)):
        raise ValueError("labels must be 0 or 1")
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc needs at least one positive and one negative label")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def completion_eval(Y: BinaryMatrix, E, spec, mask_frac: float = 0.2,
                    config: Optional[FitConfig] = None, seed: int = 0,
                    attempts: int = 10) -> MetricsReport:
    """Hold out a random ``mask_frac`` of entries, fit on the rest, score the rest."""
    if not 0 < mask_frac < 1:
        raise ValueError("mask_frac must lie in (0, 1)")
    config = FitConfig() if config is None else config
    if config.kernel != spec:
        config = replace(config, kernel=spec)
    Yd = Y.to_dense()
    for k in range(attempts):
        mask = sample_holdout_mask(Y.n, Y.p, mask_frac, seed + k)
        labels = Yd[mask.rows, mask.cols]
        if 0 < labels.sum() < labels.size:
            break
    else:
        raise ValueError(f"held-out set was single-class for {attempts} seeds")
    basis = basis_for_config(config, E)
    fit = pgd_fit(Yd, basis, config, mask=mask)
    probs = sigmoid(logits(fit.params))[mask.rows, mask.cols]
    return MetricsReport(auroc=auroc(probs, labels), sparsity=Y.sparsity,
                         n_heldout=mask.size, seed=seed + k)

