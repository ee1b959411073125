"""Synthetic bilingual worlds with a known orthogonal ground truth.

The target language is an exact rotation of clean Gaussian word vectors plus
noise. The source language is the same clean vectors shifted by a shared mean
offset and then scaled per word, ``s_i * (x_i + m)``, which breaks the length
and center invariance an orthogonal map needs. Scaling after the shift leaves
a word-dependent offset component that one round of centering cannot remove.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSpace, MultiDictionary, SeedDictionary


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 2000
    d: int = 50
    noise_sigma: float = 0.05
    # expected Euclidean norm of a clean word vector
    signal_norm: float = 1.0
    # float: norm of a random offset direction; sequence: the offset itself
    mean_offset: float | tuple[float, ...] = 0.0
    # (low, high) of the uniform per-word length scale; None disables scaling
    length_scale: tuple[float, float] | None = None
    # (low, high) of a uniform per-dimension stretch applied to the target
    # before rotation; makes the true cross-lingual map non-orthogonal
    target_stretch: tuple[float, float] | None = None
    n_train: int = 500
    n_test: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.d < 2:
            raise ValueError("need n >= 2 and d >= 2")
        if self.signal_norm <= 0:
            raise ValueError("signal_norm must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.n_train < 1 or self.n_test < 0 or self.n_train + self.n_test > self.n:
            raise ValueError("train/test split does not fit in the vocabulary")
        if not isinstance(self.mean_offset, (int, float)) and len(self.mean_offset) != self.d:
            raise ValueError("mean_offset vector must have length d")
        if self.length_scale is not None and not 0 < self.length_scale[0] <= self.length_scale[1]:
            raise ValueError("length_scale must be 0 < low <= high")
        if self.target_stretch is not None and not 0 < self.target_stretch[0] <= self.target_stretch[1]:
            raise ValueError("target_stretch must be 0 < low <= high")


@dataclass
class SyntheticWorld:
    src: EmbeddingSpace
    tgt: EmbeddingSpace
    train: SeedDictionary
    test: MultiDictionary
    # the exact source-to-target map only when target_stretch is None
    rotation: np.ndarray


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian with sign correction)."""
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def generate_synthetic(spec: SyntheticSpec) -> SyntheticWorld:
    rng = np.random.default_rng(spec.seed)
    d, n = spec.d, spec.n
    clean = rng.standard_normal((d, n)) * (spec.signal_norm / np.sqrt(d))
    Q = random_orthogonal(d, rng)

    if isinstance(spec.mean_offset, (int, float)):
        direction = rng.standard_normal(d)
        offset = float(spec.mean_offset) * direction / np.linalg.norm(direction)
    else:
        offset = np.asarray(spec.mean_offset, dtype=np.float64)
    scales = np.ones(n) if spec.length_scale is None else rng.uniform(*spec.length_scale, size=n)
    noise = spec.noise_sigma * rng.standard_normal((d, n))

    src_matrix = (clean + offset[:, None]) * scales
    stretch = np.ones(d) if spec.target_stretch is None else rng.uniform(*spec.target_stretch, size=d)
    tgt_matrix = Q @ (stretch[:, None] * clean) + noise

    order = rng.permutation(n)
    train = SeedDictionary(tuple((int(i), int(i)) for i in sorted(order[: spec.n_train])))
    test_idx = sorted(order[spec.n_train : spec.n_train + spec.n_test])
    test = MultiDictionary({int(i): frozenset([int(i)]) for i in test_idx})

    src = EmbeddingSpace(tuple(f"s{i}" for i in range(n)), src_matrix)
    tgt = EmbeddingSpace(tuple(f"t{i}" for i in range(n)), tgt_matrix)
    return SyntheticWorld(src, tgt, train, test, Q)


def nonisomorphic_spec(seed: int) -> SyntheticSpec:
    """The desk-scale non-isomorphic world used for the normalization comparison."""
    return SyntheticSpec(
        n=2000,
        d=50,
        noise_sigma=0.05,
        signal_norm=0.3,
        mean_offset=0.5,
        length_scale=(0.5, 2.0),
        n_train=500,
        n_test=500,
        seed=seed,
    )
