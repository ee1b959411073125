"""Iterative Normalization and baseline embedding normalizations.

Two projections are alternated on the column-per-word matrix: onto unit-length
columns, then onto zero column mean. Each round is exactly that order, so a
returned iterate has zero mean to rounding and unit lengths up to the current
residual.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .embeddings import EmbeddingSpace
from .errors import DataError, ZeroColumnError

logger = logging.getLogger(__name__)

METHODS = ("none", "cl", "iternorm")


@dataclass(frozen=True)
class NormalizationMethod:
    """``none``, ``cl`` (one round of centering then length), or ``iternorm``."""

    name: str = "iternorm"
    rounds: int = 5
    tolerance: float = 0.0

    def __post_init__(self):
        if self.name not in METHODS:
            raise ValueError(f"unknown normalization {self.name!r}; expected one of {METHODS}")
        if self.name == "iternorm" and self.rounds < 1:
            raise ValueError("iternorm needs rounds >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")


@dataclass
class RoundRecord:
    round_index: int
    max_length_residual: float
    mean_norm_residual: float
    iterate_delta: float
    min_column_length: float


@dataclass
class NormalizationReport:
    method: str = "iternorm"
    initial_min_column_length: float = float("nan")
    iterations: list[RoundRecord] = field(default_factory=list)
    converged: bool = False
    tolerance: float = 0.0

    @property
    def rounds_run(self) -> int:
        return len(self.iterations)

    @property
    def final(self) -> RoundRecord | None:
        return self.iterations[-1] if self.iterations else None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationReport":
        data = dict(data)
        data["iterations"] = [RoundRecord(**r) for r in data.get("iterations", [])]
        return cls(**data)


def _column_lengths(X: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->j", X, X))


def _length_project(X: np.ndarray, round_index=None, vocab=None) -> np.ndarray:
    lengths = _column_lengths(X)
    zero = np.flatnonzero(lengths == 0)
    if zero.size:
        i = int(zero[0])
        raise ZeroColumnError(i, round_index, vocab[i] if vocab is not None else None)
    return X / lengths


def _center(X: np.ndarray) -> np.ndarray:
    return X - X.mean(axis=1, keepdims=True)


def length_normalize(space: EmbeddingSpace) -> EmbeddingSpace:
    """Scale every column to unit Euclidean length."""
    return space.with_matrix(_length_project(space.matrix, vocab=space.vocab))


def mean_center(space: EmbeddingSpace) -> EmbeddingSpace:
    """Subtract the mean word vector from every column."""
    return space.with_matrix(_center(space.matrix))


def center_then_length(space: EmbeddingSpace) -> EmbeddingSpace:
    """One round of centering followed by length normalization (the C+L baseline).

    The result is unit-length but generally no longer zero-mean.
    """
    return length_normalize(mean_center(space))


def constraint_residuals(space_or_matrix) -> tuple[float, float, float]:
    """Return ``(max |len - 1|, ||mean vector||, min column length)``."""
    X = _as_matrix(space_or_matrix)
    lengths = _column_lengths(X)
    return (
        float(np.max(np.abs(lengths - 1.0))),
        float(np.linalg.norm(X.mean(axis=1))),
        float(lengths.min()),
    )


def mean_vector_length(space_or_matrix) -> float:
    return float(np.linalg.norm(_as_matrix(space_or_matrix).mean(axis=1)))


def _as_matrix(space_or_matrix) -> np.ndarray:
    if isinstance(space_or_matrix, EmbeddingSpace):
        return space_or_matrix.matrix
    return np.asarray(space_or_matrix, dtype=np.float64)


def perturb_zero_columns(X: np.ndarray, rng: np.random.Generator, scale: float = 1e-6) -> np.ndarray:
    """Replace zero columns with uniform noise of magnitude ``scale * mean length``."""
    lengths = _column_lengths(X)
    zero = np.flatnonzero(lengths == 0)
    if not zero.size:
        return X
    magnitude = scale * (lengths.mean() if lengths.mean() > 0 else 1.0)
    X = X.copy()
    X[:, zero] = rng.uniform(-magnitude, magnitude, size=(X.shape[0], zero.size))
    logger.warning("perturbed %d zero-length columns", zero.size)
    return X


def iterative_normalize(
    space: EmbeddingSpace,
    rounds: int = 5,
    tolerance: float = 0.0,
    perturb_zeros: bool = False,
    seed: int = 0,
) -> tuple[EmbeddingSpace, NormalizationReport]:
    """Alternate length projection and centering for up to ``rounds`` rounds.

    Stops early once both the length residual and the mean-norm residual of
    the current iterate are ``<= tolerance``. With ``perturb_zeros`` a column
    that is exactly zero before a length projection gets a tiny random
    perturbation instead of raising ``ZeroColumnError``.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    rng = np.random.default_rng(seed)
    X = space.matrix
    report = NormalizationReport(
        method="iternorm",
        initial_min_column_length=float(_column_lengths(X).min()),
        tolerance=tolerance,
    )
    for k in range(1, rounds + 1):
        if perturb_zeros:
            X = perturb_zero_columns(X, rng)
        X_new = _center(_length_project(X, round_index=k, vocab=space.vocab))
        max_len, mean_norm, min_len = constraint_residuals(X_new)
        report.iterations.append(
            RoundRecord(
                round_index=k,
                max_length_residual=max_len,
                mean_norm_residual=mean_norm,
                iterate_delta=float(np.linalg.norm(X_new - X)),
                min_column_length=min_len,
            )
        )
        X = X_new
        if max_len <= tolerance and mean_norm <= tolerance:
            report.converged = True
            break
    return space.with_matrix(X), report


def normalize(
    space: EmbeddingSpace, method: NormalizationMethod, perturb_zeros: bool = False, seed: int = 0
) -> tuple[EmbeddingSpace, NormalizationReport]:
    """Dispatch on ``method`` and always return a report of the final residuals."""
    if method.name == "iternorm":
        return iterative_normalize(space, method.rounds, method.tolerance, perturb_zeros, seed)

    X0 = space.matrix
    if method.name == "none":
        out = space
    elif method.name == "cl":
        X = _center(X0)
        if perturb_zeros:
            X = perturb_zero_columns(X, np.random.default_rng(seed))
        out = space.with_matrix(_length_project(X, round_index=1, vocab=space.vocab))
    else:  # pragma: no cover - guarded by NormalizationMethod
        raise DataError(method.name)
    max_len, mean_norm, min_len = constraint_residuals(out)
    report = NormalizationReport(
        method=method.name,
        initial_min_column_length=float(_column_lengths(X0).min()),
        tolerance=method.tolerance,
    )
    if method.name == "cl":
        report.iterations.append(
            RoundRecord(1, max_len, mean_norm, float(np.linalg.norm(out.matrix - X0)), min_len)
        )
    report.converged = max_len <= method.tolerance and mean_norm <= method.tolerance
    return out, report
