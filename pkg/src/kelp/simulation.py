"""Synthetic KELP data: clustered semantic embeddings, mappings and Bernoulli draws."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .matrix_io import BinaryMatrix, EmbeddingTable

MAPPINGS = ("linear", "tanh")


@dataclass(frozen=True)
class SimConfig:
    n: int
    p: int
    d: int = 50
    K: int = 10
    r: int = 8
    mapping: str = "linear"
    rho_star: float = -1.5
    perturb: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.d < 1 or self.K < 1:
            raise ValueError("n, p, d and K must be positive")
        if not 1 <= self.r <= min(self.n, self.p):
            raise ValueError(f"rank {self.r} exceeds min(n, p) = {min(self.n, self.p)}")
        if self.K > self.p:
            raise ValueError(f"cluster count K={self.K} exceeds p={self.p}")
        if self.perturb < 0:
            raise ValueError("perturb must be nonnegative")
        if self.mapping not in MAPPINGS:
            raise ValueError(f"mapping must be one of {MAPPINGS}")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    rho_star: float
    alpha_star: np.ndarray
    U_star: np.ndarray
    V_star: np.ndarray
    E: EmbeddingTable

    @property
    def signal(self) -> np.ndarray:
        return self.U_star @ self.V_star.T

    @property
    def Theta_star(self) -> np.ndarray:
        return self.rho_star + self.alpha_star[:, None] + self.signal

    @property
    def n(self) -> int:
        return self.alpha_star.shape[0]

    @property
    def p(self) -> int:
        return self.V_star.shape[0]

    def expected_sparsity(self) -> float:
        """Mean success probability, i.e. the expected fraction of ones."""
        return float(expit(self.Theta_star).mean())

    def with_rho(self, rho_star: float) -> "GroundTruth":
        return replace(self, rho_star=float(rho_star))


def _streams(seed):
    # independent children: embeddings, truth, matrix sampling
    return np.random.SeedSequence(seed).spawn(3)


def gen_semantic_embeddings(config: SimConfig):
    """Unit-norm embeddings scattered around ``K`` random centers on the sphere.

    Returns the table and the cluster label of each row.
    """
    rng = np.random.default_rng(_streams(config.seed)[0])
    centers = rng.standard_normal((config.K, config.d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    z = rng.integers(config.K, size=config.p)
    E = centers[z] + config.perturb * rng.standard_normal((config.p, config.d))
    E /= np.linalg.norm(E, axis=1, keepdims=True)
    return EmbeddingTable(E), z


def noise_embeddings(p: int, d: int, seed: int) -> EmbeddingTable:
    """Unit-norm embeddings carrying no information about the columns."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    E = rng.standard_normal((p, d))
    return EmbeddingTable(E / np.linalg.norm(E, axis=1, keepdims=True))


def _column_embeddings(E, config, rng):
    d, r = E.shape[1], config.r
    if config.mapping == "linear":
        W = rng.normal(0.0, np.sqrt(2.0), size=(d, r))
        return E @ W
    W1 = rng.standard_normal((r, d, 2 * r))
    W2 = rng.standard_normal((2 * r, r))
    V = np.empty((E.shape[0], r))
    for k in range(r):
        hidden = (E @ W1[k]) ** 2
        V[:, k] = np.tanh(hidden @ W2[:, k])
    return V


def gen_ground_truth(config: SimConfig, E: EmbeddingTable, attempts: int = 5) -> GroundTruth:
    """Balanced, normalized true parameters built from the embeddings ``E``.

    ``U`` rows are standard normal, ``V`` comes from the configured mapping of
    ``E``; both are column-centered, split through the SVD of ``U V'`` and
    scaled by a common factor so that ``|U* V*'|_F^2 = n p``.
    """
    if E.p != config.p:
        raise ValueError(f"embedding table has {E.p} rows, config has p={config.p}")
    n, p, r = config.n, config.p, config.r
    seeds = _streams(config.seed)[1].spawn(attempts)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        U = rng.standard_normal((n, r))
        U -= U.mean(axis=0)
        V = _column_embeddings(E.values, config, rng)
        V -= V.mean(axis=0)
        A, s, Bt = np.linalg.svd(U @ V.T, full_matrices=False)
        if s[r - 1] <= 1e-10 * max(s[0], 1e-300):
            continue
        root = np.sqrt(s[:r])
        U_star = A[:, :r] * root
        V_star = Bt[:r].T * root
        scale = (n * p / np.sum(s[:r] ** 2)) ** 0.25
        alpha = rng.uniform(-1.0, 1.0, size=n)
        return GroundTruth(rho_star=float(config.rho_star), alpha_star=alpha - alpha.mean(),
                           U_star=U_star * scale, V_star=V_star * scale, E=E)
    raise RuntimeError(f"U V' stayed rank deficient below r={r} after {attempts} attempts")


def sample_matrix(truth: GroundTruth, seed: int) -> BinaryMatrix:
    rng = np.random.default_rng(_streams(seed)[2])
    P = expit(truth.Theta_star)
    return BinaryMatrix.from_dense(rng.random(P.shape) < P)


def simulate(config: SimConfig, sample_seed=None):
    """Embeddings, ground truth and one binary matrix from a single config."""
    E, _ = gen_semantic_embeddings(config)
    truth = gen_ground_truth(config, E)
    Y = sample_matrix(truth, config.seed if sample_seed is None else sample_seed)
    return Y, truth


def rho_for_sparsity(truth: GroundTruth, target: float) -> float:
    """Intercept giving an expected fraction of ones equal to ``target``."""
    if not 0 < target < 1:
        raise ValueError("target fraction must lie in (0, 1)")
    base = truth.alpha_star[:, None] + truth.signal
    return brentq(lambda rho: expit(rho + base).mean() - target, -50.0, 50.0, xtol=1e-12)


def truth_to_dict(truth: GroundTruth) -> dict:
    return {
        "rho_star": truth.rho_star,
        "alpha_star": truth.alpha_star.tolist(),
        "U_star": truth.U_star.tolist(),
        "V_star": truth.V_star.tolist(),
        "Theta_star": truth.Theta_star.tolist(),
    }


def save_truth(truth: GroundTruth, path) -> None:
    Path(path).write_text(json.dumps(truth_to_dict(truth)))


def load_truth(path) -> dict:
    """Truth bundle as arrays; factor entries may be absent."""
    doc = json.loads(Path(path).read_text())
    out = {"Theta_star": np.array(doc["Theta_star"], dtype=float)}
    for key in ("U_star", "V_star", "alpha_star"):
        if doc.get(key) is not None:
            out[key] = np.array(doc[key], dtype=float)
    if doc.get("rho_star") is not None:
        out["rho_star"] = float(doc["rho_star"])
    return out
