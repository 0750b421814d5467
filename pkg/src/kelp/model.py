"""KELP parameters, logits, penalized Bernoulli likelihood and its gradients."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .kernel import KernelSpec, KpcaBasis
from .matrix_io import BinaryMatrix, EntryMask


@dataclass(frozen=True, eq=False)
class ModelParams:
    """``Theta = rho 11' + alpha 1' + U V'``; ``Gamma`` is set for kernel fits."""

    rho: float
    alpha: np.ndarray
    U: np.ndarray
    V: np.ndarray
    Gamma: Optional[np.ndarray] = None
    kernel: Optional[KernelSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "rho", float(self.rho))
        for name in ("alpha", "U", "V", "Gamma"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.array(val, dtype=float, ndmin=1 if name == "alpha" else 2))
        if self.alpha.ndim != 1:
            raise ValueError("alpha must be a vector")
        if self.U.shape[0] != self.alpha.shape[0]:
            raise ValueError(f"U has {self.U.shape[0]} rows but alpha has {self.alpha.shape[0]} entries")
        if self.U.shape[1] != self.V.shape[1]:
            raise ValueError(f"rank mismatch: U is {self.U.shape}, V is {self.V.shape}")
        if self.Gamma is not None and self.Gamma.shape[1] != self.r:
            raise ValueError("Gamma must have r columns")

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def p(self) -> int:
        return self.V.shape[0]

    @property
    def r(self) -> int:
        return self.U.shape[1]

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class FitConfig:
    """Settings for one projected gradient descent fit.

    Either ``q`` fixes the kernel PCA dimension or ``delta`` sets the energy
    threshold (retain ``1 - delta`` of the spectrum). ``box`` holds
    ``(M, M1, M2)`` when the bounded-parameter projections are wanted.
    """

    r: int = 8
    kernel: KernelSpec = field(default_factory=KernelSpec.linear)
    q: Optional[int] = None
    delta: float = 0.05
    eta: float = 0.5
    max_iters: int = 2000
    tol: float = 1e-7
    box: Optional[tuple[float, float, float]] = None
    usvt_const: float = 2.02
    clip: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("rank r must be at least 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.q is None and not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.clip < 0.5:
            raise ValueError("clip must lie in (0, 0.5)")
        if self.box is not None:
            M, M1, M2 = self.box
            if not (M > 0 and M1 > M2 > 0):
                raise ValueError("box bounds need M > 0 and M1 > M2 > 0")


def softplus(t):
    """``log(1 + exp(t))`` without overflow."""
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def sigmoid(t):
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _dense(Y, shape=None) -> np.ndarray:
    if isinstance(Y, BinaryMatrix):
        Yd = Y.to_dense()
    else:
        Yd = np.asarray(Y, dtype=float)
    if shape is not None and Yd.shape != tuple(shape):
        raise ValueError(f"data has shape {Yd.shape}, parameters imply {tuple(shape)}")
    return Yd


def observed_weights(mask, shape) -> Optional[np.ndarray]:
    """0/1 weights that are zero on held-out entries, or None without a mask."""
    if mask is None:
        return None
    M = mask.to_dense() if isinstance(mask, EntryMask) else np.asarray(mask, dtype=bool)
    if M.shape != tuple(shape):
        raise ValueError(f"mask has shape {M.shape}, expected {tuple(shape)}")
    return (~M).astype(float)


def logits(params: ModelParams) -> np.ndarray:
    return params.rho + params.alpha[:, None] + params.U @ params.V.T


def nll_from_logits(Theta, Y, weights=None) -> float:
    loss = softplus(Theta) - Y * Theta
    if weights is not None:
        loss = loss * weights
    return float(loss.sum())


def nll(params: ModelParams, Y, mask=None) -> float:
    """Bernoulli negative log-likelihood over entries not held out by ``mask``."""
    shape = (params.n, params.p)
    return nll_from_logits(logits(params), _dense(Y, shape), observed_weights(mask, shape))


def balance_penalty(U, V) -> float:
    U, V = np.atleast_2d(U), np.atleast_2d(V)
    if U.shape[1] != V.shape[1]:
        raise ValueError(f"rank mismatch: U has {U.shape[1]} columns, V has {V.shape[1]}")
    G = U.T @ U - V.T @ V
    return float(np.sum(G * G))


def regularized_objective(params: ModelParams, Y, mask=None) -> float:
    return nll(params, Y, mask) + 0.25 * balance_penalty(params.U, params.V)


def gradients_from_logits(Theta, Y, U, V, weights=None):
    R = sigmoid(Theta) - Y
    if weights is not None:
        R = R * weights
    G = U.T @ U - V.T @ V
    return R.sum(), R.sum(axis=1), R @ V + U @ G, R.T @ U - V @ G


def gradients(params: ModelParams, Y, mask=None):
    """Gradients of the regularized objective in ``(rho, alpha, U, V)``."""
    shape = (params.n, params.p)
    g_rho, g_alpha, g_U, g_V = gradients_from_logits(
        logits(params), _dense(Y, shape), params.U, params.V, observed_weights(mask, shape))
    return float(g_rho), g_alpha, g_U, g_V


def extend_embedding(params: ModelParams, basis: KpcaBasis, psi_new) -> np.ndarray:
    """Column embedding(s) for unseen entities from their kernel PCA features."""
    if params.kernel is not None and params.kernel.is_baseline:
        raise ValueError("baseline fits have no kernel basis to extend from")
    if basis is None:
        raise ValueError("extension needs the kernel PCA basis of the fit")
    if basis.p != params.p:
        raise ValueError(f"basis has {basis.p} rows, model has p={params.p}")
    Gamma = basis.coefficients(params.V)
    return np.asarray(psi_new, dtype=float) @ Gamma


def params_to_dict(params: ModelParams) -> dict:
    return {
        "r": params.r,
        "rho": params.rho,
        "alpha": params.alpha.tolist(),
        "U": params.U.tolist(),
        "V": params.V.tolist(),
        "Gamma": None if params.Gamma is None else params.Gamma.tolist(),
        "kernel": None if params.kernel is None else str(params.kernel),
    }


def params_from_dict(doc: dict) -> ModelParams:
    r = int(doc["r"])
    Gamma = doc.get("Gamma")
    return ModelParams(
        rho=doc["rho"],
        alpha=np.array(doc["alpha"], dtype=float),
        U=np.array(doc["U"], dtype=float).reshape(-1, r),
        V=np.array(doc["V"], dtype=float).reshape(-1, r),
        Gamma=None if Gamma is None else np.array(Gamma, dtype=float).reshape(-1, r),
        kernel=None if doc.get("kernel") is None else KernelSpec.parse(doc["kernel"]),
    )


def save_params(params: ModelParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params)))


def load_params(path) -> ModelParams:
    return params_from_dict(json.loads(Path(path).read_text()))
