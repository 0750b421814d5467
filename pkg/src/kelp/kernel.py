"""Gram matrices, double centering, kernel PCA bases and Nystrom features."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .matrix_io import EmbeddingTable

CLAMP_RTOL = 1e-10


class DegenerateKernelError(ValueError):
    """The centered Gram matrix has no positive eigenvalue."""


class QCappedWarning(UserWarning):
    """A fixed ``q`` exceeded the number of positive eigenvalues."""


@dataclass(frozen=True)
class KernelSpec:
    """One candidate kernel.

    ``kind`` is ``"linear"``, ``"gaussian"`` (``exp(-gamma * |a - b|^2)``, so
    ``gamma = 1 / (2 r^2)`` for radius ``r``), ``"polynomial"``
    (``(a.b + offset) ** degree``) or ``"baseline"`` (no kernel at all).
    """

    kind: str
    gamma: float = 0.0
    degree: int = 1
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian", "polynomial", "baseline"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and not self.gamma > 0:
            raise ValueError("gaussian kernel needs gamma > 0")
        if self.kind == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial degree must be a positive integer")
            if not self.offset >= 0:
                raise ValueError("polynomial offset must be nonnegative")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def gaussian(cls, gamma):
        return cls("gaussian", gamma=float(gamma))

    @classmethod
    def polynomial(cls, degree, offset=0.0):
        return cls("polynomial", degree=int(degree), offset=float(offset))

    @classmethod
    def baseline(cls):
        return cls("baseline")

    @property
    def is_baseline(self) -> bool:
        return self.kind == "baseline"

    @classmethod
    def parse(cls, text: str) -> "KernelSpec":
        """Parse ``linear | gaussian:<gamma> | poly:<degree>:<offset> | baseline``."""
        parts = text.strip().lower().split(":")
        try:
            if parts == ["linear"]:
                return cls.linear()
            if parts == ["baseline"]:
                return cls.baseline()
            if parts[0] == "gaussian" and len(parts) == 2:
                return cls.gaussian(float(parts[1]))
            if parts[0] in ("poly", "polynomial") and len(parts) in (2, 3):
                deg = float(parts[1])
                if deg != int(deg):
                    raise ValueError
                return cls.polynomial(int(deg), float(parts[2]) if len(parts) == 3 else 0.0)
        except ValueError as exc:
            raise ValueError(f"bad kernel spec {text!r}: {exc}") from None
        raise ValueError(f"bad kernel spec {text!r}")

    def __str__(self):
        if self.kind == "gaussian":
            return f"gaussian:{self.gamma!r}"
        if self.kind == "polynomial":
            return f"poly:{self.degree}:{self.offset!r}"
        return self.kind


DEFAULT_CANDIDATES = (
    KernelSpec.linear(),
    KernelSpec.gaussian(0.001),
    KernelSpec.gaussian(0.01),
    KernelSpec.gaussian(0.1),
    KernelSpec.baseline(),
)


def _as_array(E):
    return E.values if isinstance(E, EmbeddingTable) else np.atleast_2d(np.asarray(E, dtype=float))


def cross_kernel(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel values between every row of ``A`` and every row of ``B``."""
    if spec.is_baseline:
        raise ValueError("the baseline has no kernel")
    A, B = _as_array(A), _as_array(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"embedding dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    inner = A @ B.T
    if spec.kind == "linear":
        return inner
    if spec.kind == "polynomial":
        return (inner + spec.offset) ** spec.degree
    sq = np.sum(A**2, axis=1)[:, None] + np.sum(B**2, axis=1)[None, :] - 2.0 * inner
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))


def gram(spec: KernelSpec, E) -> np.ndarray:
    K = cross_kernel(spec, E, E)
    if spec.kind == "gaussian":
        np.fill_diagonal(K, 1.0)
    # mirror the upper triangle so the result is exactly symmetric
    upper = np.triu(K)
    return upper + np.triu(K, 1).T


def double_center(K) -> np.ndarray:
    """Return ``J K J`` with ``J = I - 11'/p``."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"double_center needs a square matrix, got shape {K.shape}")
    Kc = K - K.mean(axis=0, keepdims=True)
    Kc = Kc - Kc.mean(axis=1, keepdims=True)
    return 0.5 * (Kc + Kc.T)


@dataclass(frozen=True, eq=False)
class KpcaBasis:
    """Leading eigenpairs of a doubly centered Gram matrix.

    ``Psi = Phi @ diag(sqrt(mu))``. ``kbar`` holds the column means of the raw
    Gram matrix and ``train`` the training embeddings; both are needed only
    for Nystrom extension. ``energy`` is the retained spectral fraction.
    """

    Phi: np.ndarray
    mu: np.ndarray
    kbar: Optional[np.ndarray] = None
    spec: Optional[KernelSpec] = None
    train: Optional[np.ndarray] = None
    energy: float = 1.0

    @property
    def q(self) -> int:
        return self.mu.shape[0]

    @property
    def p(self) -> int:
        return self.Phi.shape[0]

    @property
    def Psi(self) -> np.ndarray:
        return self.Phi * np.sqrt(self.mu)

    def project(self, V) -> np.ndarray:
        return self.Phi @ (self.Phi.T @ V)

    def coefficients(self, V) -> np.ndarray:
        """Least-squares ``Gamma`` with ``V ~ Psi @ Gamma``."""
        return (self.Phi.T @ V) / np.sqrt(self.mu)[:, None]


def select_q(mu, delta) -> int:
    """Smallest ``q`` whose leading eigenvalues carry ``1 - delta`` of the total."""
    if not 0 < delta < 1:
        raise ValueError(f"energy threshold delta must lie in (0, 1), got {delta}")
    mu = np.asarray(mu, dtype=float)
    cum = np.cumsum(mu) / mu.sum()
    return int(np.searchsorted(cum, (1.0 - delta) - 1e-12) + 1)


def kpca(Kc, q: Optional[int] = None, delta: Optional[float] = None, kbar=None,
         spec: Optional[KernelSpec] = None, train=None) -> KpcaBasis:
    """Eigendecompose a doubly centered Gram matrix and keep ``q`` components.

    Exactly one of ``q`` (fixed dimension) or ``delta`` (energy threshold) is
    used; ``delta`` defaults to 0.05. Eigenvalues below
    ``1e-10 * max(mu_1, 1)`` count as zero.
    """
    Kc = np.asarray(Kc, dtype=float)
    if Kc.ndim != 2 or Kc.shape[0] != Kc.shape[1]:
        raise ValueError(f"kpca needs a square matrix, got shape {Kc.shape}")
    if q is not None and delta is not None:
        raise ValueError("pass either q or delta, not both")
    mu, Phi = np.linalg.eigh(0.5 * (Kc + Kc.T))
    mu, Phi = mu[::-1], Phi[:, ::-1]
    positive = mu > CLAMP_RTOL * max(mu[0], 1.0)
    n_pos = int(positive.sum())
    if n_pos == 0:
        raise DegenerateKernelError("centered Gram matrix has no positive eigenvalue")
    mu, Phi = mu[:n_pos], Phi[:, :n_pos]
    if q is None:
        q = select_q(mu, 0.05 if delta is None else delta)
    else:
        q = int(q)
        if q < 1:
            raise ValueError("q must be at least 1")
        if q > n_pos:
            warnings.warn(f"q={q} exceeds the {n_pos} positive eigenvalues; using q={n_pos}",
                          QCappedWarning, stacklevel=2)
            q = n_pos
    Phi = np.array(Phi[:, :q])
    # fix eigenvector signs: largest-magnitude entry positive
    idx = np.argmax(np.abs(Phi), axis=0)
    Phi *= np.sign(Phi[idx, np.arange(q)])
    energy = float(mu[:q].sum() / mu.sum())
    return KpcaBasis(Phi=Phi, mu=np.array(mu[:q]),
                     kbar=None if kbar is None else np.asarray(kbar, dtype=float),
                     spec=spec, train=None if train is None else _as_array(train),
                     energy=energy)


def build_basis(spec: KernelSpec, E, q: Optional[int] = None,
                delta: Optional[float] = None) -> KpcaBasis:
    """Gram matrix, double centering and kernel PCA in one call."""
    K = gram(spec, E)
    return kpca(double_center(K), q=q, delta=delta, kbar=K.mean(axis=0),
                spec=spec, train=_as_array(E))


def nystrom_features(basis: KpcaBasis, e_new, spec: Optional[KernelSpec] = None,
                     E_train=None) -> np.ndarray:
    """Kernel PCA features of unseen embeddings.

    ``e_new`` may be one ``d``-vector or an ``m x d`` array. The result is
    ``D^{-1/2} Phi' (k_new - kbar)`` with raw (unscaled) kernel values, so a
    training embedding ``e_j`` maps to row ``j`` of ``Psi``.
    """
    spec = spec if spec is not None else basis.spec
    E_train = basis.train if E_train is None else _as_array(E_train)
    if spec is None or E_train is None or basis.kbar is None:
        raise ValueError("basis lacks the kernel, training embeddings or kbar needed for extension")
    if basis.spec is not None and spec != basis.spec:
        raise ValueError(f"kernel {spec} does not match the basis kernel {basis.spec}")
    e_new = np.asarray(e_new, dtype=float)
    single = e_new.ndim == 1
    e_new = np.atleast_2d(e_new)
    if e_new.shape[1] != E_train.shape[1]:
        raise ValueError(f"embedding dimension mismatch: got {e_new.shape[1]}, expected {E_train.shape[1]}")
    k_new = cross_kernel(spec, e_new, E_train)
    psi = (k_new - basis.kbar) @ basis.Phi / np.sqrt(basis.mu)
    return psi[0] if single else psi


def basis_to_dict(basis: KpcaBasis) -> dict:
    return {
        "kernel": None if basis.spec is None else str(basis.spec),
        "q": basis.q,
        "energy": basis.energy,
        "mu": basis.mu.tolist(),
        "Phi": basis.Phi.tolist(),
        "kbar": None if basis.kbar is None else basis.kbar.tolist(),
        "train_embeddings": None if basis.train is None else basis.train.tolist(),
    }


def basis_from_dict(doc: dict) -> KpcaBasis:
    def arr(key):
        return None if doc.get(key) is None else np.array(doc[key], dtype=float)

    Phi = np.array(doc["Phi"], dtype=float).reshape(-1, int(doc["q"]))
    return KpcaBasis(Phi=Phi, mu=arr("mu"), kbar=arr("kbar"),
                     spec=None if doc.get("kernel") is None else KernelSpec.parse(doc["kernel"]),
                     train=arr("train_embeddings"), energy=float(doc.get("energy", 1.0)))


def save_basis(basis: KpcaBasis, path) -> None:
    Path(path).write_text(json.dumps(basis_to_dict(basis)))


def load_basis(path) -> KpcaBasis:
    return basis_from_dict(json.loads(Path(path).read_text()))
