"""Initialization and projected gradient descent for KELP and the GLFM baseline."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernel import KpcaBasis, build_basis
from .model import FitConfig, ModelParams, _dense, observed_weights

log = logging.getLogger(__name__)

MAX_HALVINGS = 60


class FitDivergedError(RuntimeError):
    """The objective became non-finite; ``trace`` holds the values seen so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = np.asarray(trace)


@dataclass(frozen=True, eq=False)
class FitResult:
    params: ModelParams
    objective_trace: np.ndarray
    iterations_run: int
    converged: bool
    step_sizes: tuple[float, float, float, float]
    initial: ModelParams
    step_halvings: int = 0


def project_centering(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    return alpha - alpha.mean()


def project_subspace(V, basis: KpcaBasis) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.shape[0] != basis.p:
        raise ValueError(f"V has {V.shape[0]} rows, basis has {basis.p}")
    return basis.project(V)


def basis_for_config(config: FitConfig, E) -> Optional[KpcaBasis]:
    """Kernel PCA basis for ``config.kernel``, or None for the baseline."""
    if config.kernel.is_baseline:
        return None
    if E is None:
        raise ValueError(f"kernel {config.kernel} needs an embedding table")
    if config.q is not None:
        return build_basis(config.kernel, E, q=config.q)
    return build_basis(config.kernel, E, delta=config.delta)


def _check_mode(basis, config):
    if config.kernel.is_baseline and basis is not None:
        raise ValueError("baseline fits take no kernel basis")
    if not config.kernel.is_baseline and basis is None:
        raise ValueError(f"kernel {config.kernel} needs a kernel PCA basis")


def initialize(Y, basis: Optional[KpcaBasis], config: FitConfig, mask=None) -> ModelParams:
    """Starting point from universal singular value thresholding.

    Held-out entries are treated as missing: they are zero-filled and the
    thresholded reconstruction is rescaled by the observed fraction. The
    threshold is ``usvt_const * sigma * sqrt(max(n, p) * frac_observed)`` with
    ``sigma`` the empirical Bernoulli standard deviation of observed entries.
    """
    _check_mode(basis, config)
    Yd = _dense(Y)
    n, p = Yd.shape
    r = config.r
    if r > min(n, p):
        raise ValueError(f"rank {r} exceeds min(n, p) = {min(n, p)}")
    w = observed_weights(mask, (n, p))
    if w is None:
        Yfill, frac = Yd, 1.0
    else:
        Yfill, frac = Yd * w, w.mean()
        if frac == 0:
            raise ValueError("every entry is held out")
    ybar = Yfill.sum() / (frac * n * p)
    sigma = np.sqrt(ybar * (1.0 - ybar))
    A, s, Bt = np.linalg.svd(Yfill, full_matrices=False)
    keep = s > config.usvt_const * sigma * np.sqrt(max(n, p) * frac)
    P = (A[:, keep] * s[keep]) @ Bt[keep] / frac
    P = np.clip(P, config.clip, 1.0 - config.clip)
    Theta0 = np.log(P) - np.log1p(-P)
    rho = Theta0.mean()
    alpha = project_centering(Theta0.mean(axis=1) - rho)
    R = Theta0 - rho - alpha[:, None]
    a, d, bt = np.linalg.svd(R, full_matrices=False)
    root = np.sqrt(d[:r])
    U = a[:, :r] * root
    V = bt[:r].T * root
    log.debug("USVT kept %d singular values; rho0=%.4f", int(keep.sum()), rho)
    if basis is not None:
        V = project_subspace(V, basis)
    return ModelParams(rho, alpha, U, V, kernel=config.kernel)


def _box_project(rho, alpha, U, V, basis, box):
    M, M1, M2 = box
    alpha = project_centering(np.clip(project_centering(alpha), -M, M))
    norms2 = np.sum(U * U, axis=1)
    big = norms2 > M
    if np.any(big):
        U = U.copy()
        U[big] *= np.sqrt(M / norms2[big])[:, None]
    coef = V if basis is None else basis.coefficients(V)
    g2 = float(np.sum(coef * coef))
    if g2 > M:
        V = V * np.sqrt(M / g2)
    return float(np.clip(rho, -M1, -M2)), alpha, U, V


def _objective_and_residual(Theta, Y, U, V, w):
    e = np.exp(-np.abs(Theta))
    loss = np.maximum(Theta, 0.0) + np.log1p(e) - Y * Theta
    R = np.where(Theta >= 0, 1.0, e) / (1.0 + e) - Y
    if w is not None:
        loss *= w
        R *= w
    G = U.T @ U - V.T @ V
    return float(loss.sum()) + 0.25 * float(np.sum(G * G)), R, G


def pgd_fit(Y, basis: Optional[KpcaBasis], config: FitConfig, mask=None,
            init: Optional[ModelParams] = None) -> FitResult:
    """Projected gradient descent on the balance-regularized likelihood.

    Each iteration takes a gradient step in ``(rho, alpha, U, V)``, recenters
    ``alpha`` and, with a kernel, projects ``V`` onto the kernel PCA column
    space. Pass ``basis=None`` with a baseline kernel for the unconstrained
    GLFM fit. Stops after ``max_iters`` steps or when the relative objective
    change drops to ``tol``. A step that would raise the objective is
    rejected and all step sizes are halved from then on; ``step_halvings``
    counts these events and ``step_sizes`` holds the initial sizes.
    """
    _check_mode(basis, config)
    Yd = _dense(Y)
    n, p = Yd.shape
    w = observed_weights(mask, (n, p))
    start = init if init is not None else initialize(Yd, basis, config, mask)
    if start.alpha.shape[0] != n or start.p != p:
        raise ValueError("initial parameters do not match the data shape")
    rho, alpha, U, V = start.rho, start.alpha.copy(), start.U.copy(), start.V.copy()
    if config.box is not None:
        rho, alpha, U, V = _box_project(rho, alpha, U, V, basis, config.box)

    eta = config.eta
    with np.errstate(over="ignore"):
        stack = float(np.square(np.linalg.norm(np.vstack([U, V]), 2)))
    tau_rho, tau_alpha = eta / (n * p), eta / p
    # floor at unit logit scale: a start with (near-)zero factors would
    # otherwise get an unbounded step once the factors begin to grow
    tau_uv = eta / max(stack, 1.0)
    steps = (tau_rho, tau_alpha, tau_uv, tau_uv)

    Theta = rho + alpha[:, None] + U @ V.T
    obj, R, G = _objective_and_residual(Theta, Yd, U, V, w)
    trace = [obj]
    if not np.isfinite(obj):
        raise FitDivergedError("initial objective is not finite", trace)
    converged = False
    halvings = 0
    scale = 1.0
    for t in range(config.max_iters):
        for _ in range(MAX_HALVINGS + 1):
            rho_new = rho - scale * tau_rho * R.sum()
            alpha_new = project_centering(alpha - scale * tau_alpha * R.sum(axis=1))
            U_new = U - scale * tau_uv * (R @ V + U @ G)
            V_new = V - scale * tau_uv * (R.T @ U - V @ G)
            if basis is not None:
                V_new = basis.project(V_new)
            if config.box is not None:
                rho_new, alpha_new, U_new, V_new = _box_project(
                    rho_new, alpha_new, U_new, V_new, basis, config.box)
            Theta = rho_new + alpha_new[:, None] + U_new @ V_new.T
            with np.errstate(over="ignore", invalid="ignore"):
                obj_new, R_new, G_new = _objective_and_residual(Theta, Yd, U_new, V_new, w)
            # safeguard: a step that raises the objective is retried at half size
            if np.isfinite(obj_new) and obj_new <= obj + 1e-12 * (1.0 + abs(obj)):
                break
            scale *= 0.5
            halvings += 1
        else:
            if not np.isfinite(obj_new):
                raise FitDivergedError(f"objective became non-finite at iteration {t + 1}", trace)
            log.warning("pgd_fit: no descent step after %d halvings; stopping", MAX_HALVINGS)
            break
        rho, alpha, U, V = rho_new, alpha_new, U_new, V_new
        obj, R, G = obj_new, R_new, G_new
        trace.append(obj)
        if abs(trace[-1] - trace[-2]) <= config.tol * (1.0 + abs(trace[-2])):
            converged = True
            break

    Gamma = basis.coefficients(V) if basis is not None else None
    params = ModelParams(rho, alpha, U, V, Gamma=Gamma, kernel=config.kernel)
    log.info("pgd_fit %s: %d iterations, objective %.6g, converged=%s",
             config.kernel, len(trace) - 1, trace[-1], converged)
    return FitResult(params=params, objective_trace=np.array(trace),
                     iterations_run=len(trace) - 1, converged=converged,
                     step_sizes=steps, initial=start, step_halvings=halvings)
