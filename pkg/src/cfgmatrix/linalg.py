"""Small dense matrices and seeded random matrix substitutions.

Matrices are plain ``numpy`` float64 arrays of shape ``(n, n)``.  The
helpers below add the dimension and finiteness checks the solver relies on.
The Frobenius norm is used throughout; it is submultiplicative, which is all
the contraction estimates need.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

Matrix = np.ndarray
Seed = Union[int, Sequence[int]]


class DimensionMismatch(ValueError):
    pass


def _check_square(a: Matrix) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")


def _check_pair(a: Matrix, b: Matrix) -> None:
    _check_square(a)
    _check_square(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")


def _finite(a: Matrix) -> Matrix:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("non-finite matrix entry")
    return a


def as_matrix(entries) -> Matrix:
    a = np.array(entries, dtype=np.float64)
    _check_square(a)
    return _finite(a)


def identity(dim: int) -> Matrix:
    return np.eye(dim)


def zero(dim: int) -> Matrix:
    return np.zeros((dim, dim))


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    _check_pair(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        return _finite(a + b)


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    _check_pair(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        return _finite(a @ b)


def mat_scale(a: Matrix, t: float) -> Matrix:
    _check_square(a)
    with np.errstate(over="ignore", invalid="ignore"):
        return _finite(a * t)


def frobenius_norm(a: Matrix) -> float:
    return float(np.sqrt(np.sum(a * a)))


def max_abs_diff(a: Matrix, b: Matrix) -> float:
    _check_pair(a, b)
    return float(np.max(np.abs(a - b)))


@dataclass(frozen=True)
class Substitution:
    """An ``n x n`` matrix for every terminal."""

    dim: int
    matrices: Mapping[str, Matrix]
    norm_bound: float
    seed: Seed | None = None

    def __post_init__(self):
        for name, m in self.matrices.items():
            if m.shape != (self.dim, self.dim):
                raise DimensionMismatch(f"matrix for {name} has shape {m.shape}")

    def __getitem__(self, terminal: str) -> Matrix:
        return self.matrices[terminal]

    @property
    def terminals(self) -> tuple[str, ...]:
        return tuple(self.matrices)

    def scaled(self, factor: float) -> "Substitution":
        return Substitution(
            self.dim,
            {k: m * factor for k, m in self.matrices.items()},
            self.norm_bound * factor,
            self.seed,
        )

    def to_json(self) -> dict:
        seed = list(self.seed) if isinstance(self.seed, (list, tuple)) else self.seed
        return {
            "dim": self.dim,
            "norm_bound": self.norm_bound,
            "seed": seed,
            "matrices": {k: m.ravel().tolist() for k, m in self.matrices.items()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Substitution":
        dim = int(doc["dim"])
        mats = {k: np.array(v, dtype=np.float64).reshape(dim, dim) for k, v in doc["matrices"].items()}
        seed = doc.get("seed")
        if isinstance(seed, list):
            seed = tuple(seed)
        return cls(dim, mats, float(doc["norm_bound"]), seed)


def scalar_substitution(terminals: Iterable[str], t: float) -> Substitution:
    return Substitution(1, {a: np.array([[t]], dtype=np.float64) for a in terminals}, abs(t))


def random_substitution(terminals: Iterable[str], dim: int, delta: float, seed: Seed) -> Substitution:
    """Independent random matrices with Frobenius norms in ``[delta/2, delta]``.

    Entries are drawn uniform in ``[-1, 1]`` and each matrix is rescaled to
    norm ``delta * r`` with ``r`` uniform in ``[0.5, 1]``.  Terminals are
    visited in sorted order, so the result depends only on the arguments.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    if not delta > 0:
        raise ValueError("delta must be positive")
    rng = np.random.default_rng(seed)
    mats = {}
    for name in sorted(set(terminals)):
        m = rng.uniform(-1.0, 1.0, size=(dim, dim))
        r = rng.uniform(0.5, 1.0)
        norm = frobenius_norm(m)
        if norm == 0.0:  # measure zero, but keep the envelope honest
            m = np.eye(dim)
            norm = frobenius_norm(m)
        mats[name] = m * (delta * r / norm)
    return Substitution(dim, mats, delta, tuple(seed) if isinstance(seed, (list, tuple)) else seed)
