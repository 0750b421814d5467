"""Binary observation matrices, embedding tables and hold-out masks.

File formats
------------
Matrix / mask file
    First line ``n p``; every following line ``i j`` (0-based) marks one entry.
Embedding file
    Comma-separated floats, one row per column entity.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Raised when an input file does not follow the documented layout."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_pairs(rows, cols, n, p, what):
    rows = np.asarray(rows, dtype=np.int64).reshape(-1)
    cols = np.asarray(cols, dtype=np.int64).reshape(-1)
    if rows.shape != cols.shape:
        raise ValueError(f"{what}: row and column index arrays differ in length")
    if rows.size:
        if rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= p:
            raise ValueError(f"{what}: index out of range for dims ({n}, {p})")
    flat = rows * p + cols
    order = np.argsort(flat, kind="stable")
    flat = flat[order]
    if flat.size > 1 and np.any(flat[1:] == flat[:-1]):
        raise ValueError(f"{what}: duplicate index pair")
    return _readonly(rows[order]), _readonly(cols[order])


@dataclass(frozen=True, eq=False)
class BinaryMatrix:
    """An ``n x p`` 0/1 matrix stored as the sorted coordinates of its ones."""

    n: int
    p: int
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("BinaryMatrix needs n >= 1 and p >= 1")
        rows, cols = _check_pairs(self.rows, self.cols, self.n, self.p, "BinaryMatrix")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @classmethod
    def from_dense(cls, Y) -> "BinaryMatrix":
        Y = np.asarray(Y)
        if Y.ndim != 2:
            raise ValueError("expected a 2-d array")
        if not np.all((Y == 0) | (Y == 1)):
            raise ValueError("entries must be 0 or 1")
        rows, cols = np.nonzero(Y)
        return cls(Y.shape[0], Y.shape[1], rows, cols)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.p)

    @property
    def ones(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    @property
    def nnz(self) -> int:
        return int(self.rows.size)

    @property
    def sparsity(self) -> float:
        """Fraction of entries equal to one."""
        return self.nnz / (self.n * self.p)

    def to_dense(self, dtype=float) -> np.ndarray:
        Y = np.zeros((self.n, self.p), dtype=dtype)
        Y[self.rows, self.cols] = 1
        return Y

    def __getitem__(self, ij) -> int:
        i, j = ij
        if not (0 <= i < self.n and 0 <= j < self.p):
            raise IndexError((i, j))
        key = i * self.p + j
        flat = self.rows * self.p + self.cols
        k = np.searchsorted(flat, key)
        return int(k < flat.size and flat[k] == key)

    def __eq__(self, other):
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols))


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """``p x d`` table of external semantic embeddings; row ``j`` is ``e_j``."""

    values: np.ndarray

    def __post_init__(self):
        E = np.array(self.values, dtype=float)
        if E.ndim == 1:
            E = E[None, :]
        if E.ndim != 2 or E.shape[0] < 1 or E.shape[1] < 1:
            raise ValueError("embedding table must be a non-empty 2-d array")
        if not np.all(np.isfinite(E)):
            raise ValueError("embedding table has non-finite entries")
        object.__setattr__(self, "values", _readonly(E))

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class EntryMask:
    """Held-out entry set over an ``(n, p)`` index range."""

    dims: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        n, p = self.dims
        rows, cols = _check_pairs(self.rows, self.cols, n, p, "EntryMask")
        object.__setattr__(self, "dims", (int(n), int(p)))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @classmethod
    def from_dense(cls, M) -> "EntryMask":
        M = np.asarray(M, dtype=bool)
        rows, cols = np.nonzero(M)
        return cls(M.shape, rows, cols)

    @property
    def held_out(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    @property
    def size(self) -> int:
        return int(self.rows.size)

    def to_dense(self) -> np.ndarray:
        M = np.zeros(self.dims, dtype=bool)
        M[self.rows, self.cols] = True
        return M

    def __eq__(self, other):
        if not isinstance(other, EntryMask):
            return NotImplemented
        return (self.dims == other.dims
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols))


def _parse_int(tok, path, lineno):
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: non-integer token {tok!r}") from None


def _read_coordinates(path):
    lines = Path(path).read_text().splitlines()
    body = [(k + 1, ln.split()) for k, ln in enumerate(lines) if ln.strip()]
    if not body:
        raise FormatError(f"{path}: empty file, expected header 'n p'")
    lineno, head = body[0]
    if len(head) != 2:
        raise FormatError(f"{path}:{lineno}: malformed header, expected 'n p'")
    n, p = (_parse_int(t, path, lineno) for t in head)
    if n < 1 or p < 1:
        raise FormatError(f"{path}:{lineno}: dimensions must be positive")
    rows, cols, seen = [], [], set()
    for lineno, toks in body[1:]:
        if len(toks) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'i j'")
        i, j = (_parse_int(t, path, lineno) for t in toks)
        if not (0 <= i < n and 0 <= j < p):
            raise FormatError(f"{path}:{lineno}: index ({i}, {j}) out of range for ({n}, {p})")
        if (i, j) in seen:
            raise FormatError(f"{path}:{lineno}: duplicate pair ({i}, {j})")
        seen.add((i, j))
        rows.append(i)
        cols.append(j)
    return n, p, rows, cols


def _write_coordinates(path, n, p, rows, cols):
    lines = [f"{n} {p}"]
    lines += [f"{i} {j}" for i, j in zip(rows.tolist(), cols.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def load_binary_matrix(path) -> BinaryMatrix:
    n, p, rows, cols = _read_coordinates(path)
    return BinaryMatrix(n, p, rows, cols)


def save_binary_matrix(Y: BinaryMatrix, path) -> None:
    _write_coordinates(path, Y.n, Y.p, Y.rows, Y.cols)


def load_mask(path) -> EntryMask:
    n, p, rows, cols = _read_coordinates(path)
    return EntryMask((n, p), rows, cols)


def save_mask(mask: EntryMask, path) -> None:
    _write_coordinates(path, mask.dims[0], mask.dims[1], mask.rows, mask.cols)


def load_embeddings(path) -> EmbeddingTable:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty embedding file")
    rows = []
    for k, ln in enumerate(lines, start=1):
        toks = ln.split(",")
        try:
            row = [float(t) for t in toks]
        except ValueError:
            raise FormatError(f"{path}:{k}: non-numeric token") from None
        if rows and len(row) != len(rows[0]):
            raise FormatError(f"{path}:{k}: ragged row ({len(row)} values, expected {len(rows[0])})")
        rows.append(row)
    try:
        return EmbeddingTable(np.array(rows))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def format_float(x: float) -> str:
    return f"{x:.17g}"


def save_embeddings(E: EmbeddingTable, path) -> None:
    text = "\n".join(",".join(format_float(x) for x in row) for row in E.values.tolist())
    Path(path).write_text(text + "\n")


def sample_holdout_mask(n: int, p: int, pi: float, seed: int) -> EntryMask:
    """Include each entry of an ``n x p`` grid independently with probability ``pi``."""
    if not 0 < pi < 1:
        raise ValueError(f"hold-out probability must lie in (0, 1), got {pi}")
    rng = np.random.default_rng(seed)
    return EntryMask.from_dense(rng.random((n, p)) < pi)
