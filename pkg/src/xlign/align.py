"""Linear cross-lingual maps.

Three fitters share one data model (``LinearMap``): closed-form orthogonal
Procrustes, Procrustes refined on synthetic mutual-CSLS dictionaries, and
relaxed-CSLS (RCSLS) subgradient training without an orthogonality constraint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .embeddings import EmbeddingSpace, MultiDictionary, SeedDictionary
from .errors import DataError, NumericalError
from .retrieval import Csls, evaluate_p1, knn_mean_similarities, unit_rows

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class LinearMap:
    matrix: np.ndarray
    orthogonal: bool = False
    orthogonality_residual: float = field(init=False)

    def __post_init__(self):
        W = np.array(self.matrix, dtype=np.float64, copy=True)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DataError(f"map must be square, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise NumericalError("map has non-finite entries")
        residual = float(np.linalg.norm(W.T @ W - np.eye(W.shape[0])))
        if self.orthogonal and residual > ORTHOGONALITY_TOL:
            raise NumericalError(f"map tagged orthogonal but ||W^T W - I||_F = {residual:.3g}")
        W.flags.writeable = False
        object.__setattr__(self, "matrix", W)
        object.__setattr__(self, "orthogonality_residual", residual)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, space: EmbeddingSpace) -> EmbeddingSpace:
        return space.with_matrix(self.matrix @ space.matrix)


def write_map(W: LinearMap, stream: TextIO) -> None:
    stream.write(f"{W.dim} {int(W.orthogonal)}\n")
    for row in W.matrix:
        stream.write(" ".join("%.17g" % v for v in row) + "\n")


def read_map(stream) -> LinearMap:
    lines = [line for line in stream if line.strip()]
    if not lines:
        raise DataError("empty map file")
    head = lines[0].split()
    if len(head) != 2 or not head[0].isdigit() or head[1] not in ("0", "1"):
        raise DataError(f"malformed map header {lines[0].rstrip()!r}")
    d = int(head[0])
    if len(lines) - 1 != d:
        raise DataError(f"map header declares {d} rows, found {len(lines) - 1}")
    try:
        rows = [np.array(line.split(), dtype=np.float64) for line in lines[1:]]
    except ValueError:
        raise DataError("non-numeric entry in map file") from None
    if any(r.shape != (d,) for r in rows):
        raise DataError(f"every map row must have {d} values")
    return LinearMap(np.stack(rows), orthogonal=head[1] == "1")


def save_map(W: LinearMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_map(W, fh)


def load_map(path) -> LinearMap:
    with open(path, encoding="utf-8") as fh:
        return read_map(fh)


# --------------------------------------------------------------------------
# Procrustes


def _check_pairs(src: EmbeddingSpace, tgt: EmbeddingSpace, dictionary: SeedDictionary) -> SeedDictionary:
    if src.dim != tgt.dim:
        raise DataError(f"dimension mismatch: source d={src.dim}, target d={tgt.dim}")
    if len(dictionary) == 0:
        raise DataError("empty dictionary")
    dictionary.check_bounds(src.n, tgt.n)
    return dictionary.unique()


def orthogonal_polar(M: np.ndarray) -> np.ndarray:
    """``U V^T`` from the SVD ``M = U S V^T``: the orthogonal factor nearest ``M``."""
    if not np.all(np.isfinite(M)):
        raise NumericalError("SVD input has non-finite entries")
    try:
        U, s, Vt = np.linalg.svd(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    return U @ Vt


def procrustes_fit(src: EmbeddingSpace, tgt: EmbeddingSpace, dictionary: SeedDictionary) -> LinearMap:
    """Orthogonal ``W`` minimizing ``sum ||W x_i - z_j||^2`` over the dictionary pairs."""
    i, j = _check_pairs(src, tgt, dictionary).arrays()
    M = tgt.matrix[:, j] @ src.matrix[:, i].T
    return LinearMap(orthogonal_polar(M), orthogonal=True)


def objective_value(W, src: EmbeddingSpace, tgt: EmbeddingSpace, dictionary: SeedDictionary) -> float:
    """Total squared Euclidean distance between mapped sources and their translations."""
    if len(dictionary) == 0:
        raise DataError("empty dictionary")
    dictionary.check_bounds(src.n, tgt.n)
    i, j = dictionary.arrays()
    M = np.asarray(getattr(W, "matrix", W), dtype=np.float64)
    diff = M @ src.matrix[:, i] - tgt.matrix[:, j]
    return float(np.sum(diff * diff))


# --------------------------------------------------------------------------
# refinement


@dataclass(frozen=True)
class RefineConfig:
    steps: int = 5
    synthetic_pool: int = 10_000
    knn: int = 10
    criterion: str = "mutual-csls"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("refinement needs steps >= 1")
        if self.synthetic_pool < 1 or self.knn < 1:
            raise ValueError("synthetic_pool and knn must be positive")
        if self.criterion != "mutual-csls":
            raise ValueError(f"unsupported refinement criterion {self.criterion!r}")


def _block_argmax(A: np.ndarray, B: np.ndarray, r_a: np.ndarray, r_b: np.ndarray, block: int = 1024):
    """Row-wise argmax of ``2 A B^T - r_a[:, None] - r_b[None, :]`` without materializing it."""
    best = np.empty(A.shape[0], dtype=np.int64)
    for start in range(0, A.shape[0], block):
        S = 2.0 * (A[start : start + block] @ B.T) - r_a[start : start + block, None] - r_b[None, :]
        best[start : start + block] = np.argmax(S, axis=1)
    return best


def build_synthetic_dictionary(
    W, src: EmbeddingSpace, tgt: EmbeddingSpace, cfg: RefineConfig = RefineConfig()
) -> SeedDictionary:
    """Mutual CSLS nearest neighbors among the ``synthetic_pool`` most frequent words.

    Pairs come out in ascending source index. Raises ``NumericalError`` when
    no mutual pair exists.
    """
    pool = cfg.synthetic_pool
    if pool > min(src.n, tgt.n):
        raise DataError(f"synthetic_pool={pool} exceeds vocabulary sizes ({src.n}, {tgt.n})")
    if cfg.knn > pool:
        raise DataError(f"knn={cfg.knn} exceeds synthetic_pool={pool}")
    M = np.asarray(getattr(W, "matrix", W), dtype=np.float64)
    S = unit_rows((M @ src.matrix[:, :pool]).T)
    T = unit_rows(tgt.matrix[:, :pool].T)
    r_s = knn_mean_similarities(S, T, cfg.knn)
    r_t = knn_mean_similarities(T, S, cfg.knn)
    forward = _block_argmax(S, T, r_s, r_t)
    backward = _block_argmax(T, S, r_t, r_s)
    sources = np.flatnonzero(backward[forward] == np.arange(pool))
    if not sources.size:
        raise NumericalError("synthetic dictionary is empty")
    return SeedDictionary(tuple((int(i), int(forward[i])) for i in sources))


def refine(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    seed_dict: SeedDictionary,
    cfg: RefineConfig = RefineConfig(),
) -> tuple[LinearMap, list[int]]:
    """Procrustes on the seed, then ``cfg.steps`` rounds of Procrustes on synthetic dictionaries.

    Returns the final map and the synthetic dictionary size of each step. A
    step producing an empty dictionary stops refinement at the last valid map.
    """
    W = procrustes_fit(src, tgt, seed_dict)
    sizes = []
    for step in range(1, cfg.steps + 1):
        try:
            synthetic = build_synthetic_dictionary(W, src, tgt, cfg)
        except NumericalError:
            logger.warning("refinement step %d: empty synthetic dictionary; keeping previous map", step)
            break
        sizes.append(len(synthetic))
        W = procrustes_fit(src, tgt, synthetic)
    return W, sizes


# --------------------------------------------------------------------------
# RCSLS


@dataclass(frozen=True)
class RcslsConfig:
    learning_rates: tuple[float, ...] = (1.0, 10.0, 25.0, 50.0)
    epoch_candidates: tuple[int, ...] = (10, 20)
    knn: int = 10
    neighbor_pool: int = 50_000
    batch_size: int = 512
    seed: int = 0
    validation_size: int = 500
    strict_lengths: bool = True

    def __post_init__(self):
        if not self.learning_rates or not self.epoch_candidates:
            raise ValueError("empty hyperparameter grid")
        if any(lr <= 0 for lr in self.learning_rates) or any(e < 1 for e in self.epoch_candidates):
            raise ValueError("learning rates and epoch counts must be positive")
        if self.knn < 1 or self.neighbor_pool < 1 or self.batch_size < 1:
            raise ValueError("knn, neighbor_pool and batch_size must be positive")


def _check_unit(space: EmbeddingSpace, tol: float = 1e-6) -> None:
    lengths = np.linalg.norm(space.matrix, axis=0)
    bad = np.flatnonzero(np.abs(lengths - 1.0) > tol)
    if bad.size:
        raise DataError(
            f"RCSLS expects unit-length embeddings; word {int(bad[0])} has length {lengths[bad[0]]:.6g}"
        )


def _top_indices(S: np.ndarray, k: int) -> np.ndarray:
    if k >= S.shape[1]:
        return np.broadcast_to(np.arange(S.shape[1]), S.shape).copy()
    return np.argpartition(-S, k - 1, axis=1)[:, :k]


def rcsls_neighbors(M, X, Z, src_idx, tgt_idx, knn, neighbor_pool):
    """Neighbor sets for RCSLS on a batch of pairs.

    ``X`` and ``Z`` are row-per-word arrays. Returns ``(n_t, n_s)``: the
    ``knn`` pool targets with the largest dot product against each ``W x_i``,
    and the ``knn`` pool sources whose mapped vectors have the largest dot
    product against each ``z_j``.
    """
    Xp, Zp = X[:neighbor_pool], Z[:neighbor_pool]
    if knn > min(len(Xp), len(Zp)):
        raise DataError(f"knn={knn} exceeds the neighbor pool")
    mapped = X[src_idx] @ M.T
    n_t = _top_indices(mapped @ Zp.T, knn)
    n_s = _top_indices(Z[tgt_idx] @ (Xp @ M.T).T, knn)
    return n_t, n_s


def rcsls_objective(M, X, Z, src_idx, tgt_idx, n_t, n_s) -> tuple[float, np.ndarray]:
    """Loss and gradient w.r.t. ``W`` with the neighbor sets held fixed."""
    knn = n_t.shape[1]
    Xb, Yb = X[src_idx], Z[tgt_idx]
    mapped = Xb @ M.T
    zt_sum = Z[n_t].sum(axis=1)  # (b, d): sum of target neighbors of W x_i
    xs_sum = X[n_s].sum(axis=1)  # (b, d): sum of source neighbors of z_j (unmapped)
    b = len(src_idx)
    loss = (
        -2.0 * np.sum(mapped * Yb)
        + np.sum(mapped * zt_sum) / knn
        + np.sum((xs_sum @ M.T) * Yb) / knn
    ) / b
    grad = (-2.0 * Yb.T @ Xb + (zt_sum.T @ Xb) / knn + (Yb.T @ xs_sum) / knn) / b
    return float(loss), grad


def rcsls_loss(
    W,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    dictionary: SeedDictionary,
    knn: int = 10,
    neighbor_pool: int | None = None,
    strict_lengths: bool = True,
) -> float:
    """Negated mean CSLS (dot-product form) over the dictionary pairs."""
    if len(dictionary) == 0:
        raise DataError("empty dictionary")
    dictionary.check_bounds(src.n, tgt.n)
    if strict_lengths:
        _check_unit(src)
        _check_unit(tgt)
    M = np.asarray(getattr(W, "matrix", W), dtype=np.float64)
    X, Z = src.matrix.T, tgt.matrix.T
    pool = neighbor_pool or max(src.n, tgt.n)
    i, j = dictionary.arrays()
    n_t, n_s = rcsls_neighbors(M, X, Z, i, j, knn, pool)
    return rcsls_objective(M, X, Z, i, j, n_t, n_s)[0]


@dataclass
class GridPoint:
    learning_rate: float
    epochs: int
    validation_p1: float
    failed: bool = False


@dataclass
class RcslsResult:
    map: LinearMap
    learning_rate: float
    epochs: int
    loss_trace: list[float]
    grid: list[GridPoint]


def split_validation(train: SeedDictionary, size: int, seed: int) -> tuple[SeedDictionary, SeedDictionary]:
    """Hold out ``size`` pairs (seeded shuffle); never more than a fifth of the pairs."""
    pairs = list(train.unique().pairs)
    size = min(size, len(pairs) // 5)
    if size < 1:
        raise DataError("training dictionary too small to hold out a validation split")
    order = np.random.default_rng(seed).permutation(len(pairs))
    held = sorted(pairs[k] for k in order[:size])
    kept = sorted(pairs[k] for k in order[size:])
    return SeedDictionary(tuple(kept)), SeedDictionary(tuple(held))


def rcsls_train(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    train_dict: SeedDictionary,
    valid_dict: MultiDictionary | SeedDictionary | None = None,
    cfg: RcslsConfig = RcslsConfig(),
) -> RcslsResult:
    """Grid-searched RCSLS training, initialized from Procrustes.

    Every grid point runs constant-step mini-batch subgradient descent, with
    neighbor sets recomputed for each batch. The point with the best
    validation P@1 (CSLS, restricted to the neighbor pool) wins; ties go to
    the earlier grid point. A point whose loss turns non-finite is marked
    failed.
    """
    if cfg.strict_lengths:
        _check_unit(src)
        _check_unit(tgt)
    train = _check_pairs(src, tgt, train_dict)
    if valid_dict is None:
        train, held = split_validation(train, cfg.validation_size, cfg.seed)
        valid_dict = held.to_multi()
    elif isinstance(valid_dict, SeedDictionary):
        valid_dict = valid_dict.to_multi()
    if len(valid_dict) == 0:
        raise DataError("empty validation dictionary")
    if set(train.pairs) & set(valid_dict.to_seed().pairs):
        raise DataError("training and validation dictionaries overlap")

    W0 = procrustes_fit(src, tgt, train).matrix
    X, Z = src.matrix.T, tgt.matrix.T
    pool = min(cfg.neighbor_pool, src.n, tgt.n)
    src_idx, tgt_idx = train.arrays()
    src_val, tgt_val = src.truncate(pool), tgt.truncate(pool)
    val_in_pool = MultiDictionary(
        {i: ts for i, ts in valid_dict.entries.items() if i < pool}
    )
    wanted = set(cfg.epoch_candidates)
    max_epochs = max(wanted)

    def full_loss(M):
        n_t, n_s = rcsls_neighbors(M, X, Z, src_idx, tgt_idx, cfg.knn, pool)
        return rcsls_objective(M, X, Z, src_idx, tgt_idx, n_t, n_s)[0]

    def validate(M):
        if len(val_in_pool) == 0:
            return 0.0
        hits = evaluate_p1(M, src_val, tgt_val, val_in_pool, Csls(cfg.knn)).correct
        return hits / len(valid_dict)

    grid: list[GridPoint] = []
    best = None
    for lr in cfg.learning_rates:
        rng = np.random.default_rng(cfg.seed)
        M = W0.copy()
        trace = [full_loss(M)]
        failed = False
        for epoch in range(1, max_epochs + 1):
            order = rng.permutation(len(src_idx))
            for start in range(0, len(order), cfg.batch_size):
                batch = order[start : start + cfg.batch_size]
                n_t, n_s = rcsls_neighbors(M, X, Z, src_idx[batch], tgt_idx[batch], cfg.knn, pool)
                _, grad = rcsls_objective(M, X, Z, src_idx[batch], tgt_idx[batch], n_t, n_s)
                M = M - lr * grad
            failed = failed or not np.all(np.isfinite(M))
            trace.append(full_loss(M) if not failed else float("nan"))
            failed = failed or not np.isfinite(trace[-1])
            if epoch not in wanted:
                continue
            if failed:
                logger.warning("RCSLS lr=%g epochs=%d diverged", lr, epoch)
                grid.append(GridPoint(lr, epoch, float("nan"), failed=True))
                continue
            p1 = validate(M)
            grid.append(GridPoint(lr, epoch, p1))
            if best is None or p1 > best[0]:
                best = (p1, M.copy(), lr, epoch, list(trace))
    if best is None:
        raise NumericalError("every RCSLS grid point diverged")
    _, M, lr, epochs, trace = best
    return RcslsResult(LinearMap(M, orthogonal=False), lr, epochs, trace, grid)
