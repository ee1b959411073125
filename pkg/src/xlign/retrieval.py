"""Nearest-neighbor and CSLS retrieval, P@1 evaluation, word similarity.

All similarities are cosines computed as dot products of explicitly
re-normalized vectors. Score matrices are built in blocks of queries.
Ranking ties are broken by ascending index, i.e. the more frequent word wins.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .embeddings import EmbeddingSpace, MultiDictionary
from .errors import DataError

DEFAULT_BLOCK = 512


@dataclass(frozen=True)
class NearestNeighbor:
    def __str__(self):
        return "nn"


@dataclass(frozen=True)
class Csls:
    knn: int = 10

    def __post_init__(self):
        if self.knn < 1:
            raise ValueError("CSLS needs knn >= 1")

    def __str__(self):
        return f"csls_knn_{self.knn}"


RetrievalCriterion = NearestNeighbor | Csls


def parse_criterion(name: str, knn: int = 10) -> RetrievalCriterion:
    name = name.lower()
    if name == "nn":
        return NearestNeighbor()
    if name == "csls":
        return Csls(knn)
    raise ValueError(f"unknown retrieval criterion {name!r}")


# --------------------------------------------------------------------------
# primitives


def _matrix_of(W) -> np.ndarray:
    return np.asarray(getattr(W, "matrix", W), dtype=np.float64)


def unit_rows(A: np.ndarray) -> np.ndarray:
    """Row-normalize; all-zero rows stay zero."""
    A = np.asarray(A, dtype=np.float64)
    norms = np.linalg.norm(A, axis=-1, keepdims=True)
    return A / np.where(norms > 0, norms, 1.0)


def top_k_mean(S: np.ndarray, k: int) -> np.ndarray:
    """Mean of the ``k`` largest entries of each row of ``S``.

    The selected values are summed in descending order so the result equals a
    full sort followed by a mean, bit for bit.
    """
    S = np.atleast_2d(S)
    n = S.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    top = S if k == n else -np.partition(-S, k - 1, axis=1)[:, :k]
    top = np.ascontiguousarray(np.sort(top, axis=1)[:, ::-1])
    return top.mean(axis=1)


def knn_mean_similarities(
    queries: np.ndarray,
    pool: np.ndarray,
    k: int,
    exclude: np.ndarray | None = None,
    block_size: int = DEFAULT_BLOCK,
) -> np.ndarray:
    """For each query row, mean cosine to its ``k`` most similar pool rows.

    ``exclude[q]`` (an index into ``pool``, or -1) removes one pool entry from
    query ``q``'s candidates, for when queries and pool share a space.
    """
    Q = unit_rows(queries)
    P = unit_rows(pool)
    n_pool = P.shape[0]
    limit = n_pool - (1 if exclude is not None else 0)
    if not 1 <= k <= limit:
        raise ValueError(f"k={k} out of range [1, {limit}]")
    out = np.empty(Q.shape[0])
    for start in range(0, Q.shape[0], block_size):
        S = Q[start : start + block_size] @ P.T
        if exclude is not None:
            ex = np.asarray(exclude[start : start + block_size])
            rows = np.flatnonzero(ex >= 0)
            S[rows, ex[rows]] = -np.inf
        out[start : start + block_size] = top_k_mean(S, k)
    return out


def knn_mean_similarity(query, pool: EmbeddingSpace, k: int, exclude_index: int | None = None) -> float:
    """Mean cosine between ``query`` and its ``k`` nearest columns of ``pool``."""
    query = np.asarray(query, dtype=np.float64)
    if not np.all(np.isfinite(query)):
        raise DataError("query vector is not finite")
    exclude = None if exclude_index is None else np.array([exclude_index])
    return float(knn_mean_similarities(query[None, :], pool.matrix.T, k, exclude)[0])


def csls_scores(mapped_query, tgt: EmbeddingSpace, r_query: float, r_targets) -> np.ndarray:
    """``2 cos(Wx, z_j) - r_T(Wx) - r_S(z_j)`` for every target column ``j``."""
    q = np.asarray(mapped_query, dtype=np.float64)
    r_targets = np.asarray(r_targets, dtype=np.float64)
    if q.shape != (tgt.dim,) or r_targets.shape != (tgt.n,):
        raise DataError(
            f"shape mismatch: query {q.shape}, targets ({tgt.dim}, {tgt.n}), penalties {r_targets.shape}"
        )
    cos = unit_rows(tgt.matrix.T) @ unit_rows(q)
    return 2.0 * cos - r_query - r_targets


def rank_row(scores: np.ndarray, topk: int) -> np.ndarray:
    """Indices of the ``topk`` largest scores, ties broken by ascending index."""
    n = scores.shape[0]
    if topk >= n:
        return np.argsort(-scores, kind="stable")
    kth = -np.partition(-scores, topk - 1)[topk - 1]
    cand = np.flatnonzero(scores >= kth)
    return cand[np.argsort(-scores[cand], kind="stable")][:topk]


def csls_penalties(
    mapped_src: np.ndarray,
    tgt_vectors: np.ndarray,
    knn: int,
    source_pool: int | None = None,
    target_pool: int | None = None,
    query_rows: np.ndarray | None = None,
    block_size: int = DEFAULT_BLOCK,
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(r_src, r_tgt)``: hubness penalties for mapped sources and targets.

    ``r_src[q]`` is the mean cosine of mapped source ``query_rows[q]`` (all
    sources when ``None``) to its ``knn`` nearest targets among the first
    ``target_pool`` targets; ``r_tgt[j]`` is the mean cosine of target ``j`` to
    its ``knn`` nearest mapped sources among the first ``source_pool`` sources.
    """
    src_pool = mapped_src[:source_pool] if source_pool else mapped_src
    tgt_pool = tgt_vectors[:target_pool] if target_pool else tgt_vectors
    queries = mapped_src if query_rows is None else mapped_src[query_rows]
    r_src = knn_mean_similarities(queries, tgt_pool, knn, block_size=block_size)
    r_tgt = knn_mean_similarities(tgt_vectors, src_pool, knn, block_size=block_size)
    return r_src, r_tgt


# --------------------------------------------------------------------------
# translation


def translate_topk(
    W,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    query_indices: Sequence[int],
    criterion: RetrievalCriterion = Csls(10),
    topk: int = 1,
    source_pool: int | None = None,
    target_pool: int | None = None,
    block_size: int = DEFAULT_BLOCK,
) -> list[list[tuple[int, float]]]:
    """Rank target words for each source query ``W x_i``.

    Returns, per query, ``topk`` ``(target_index, score)`` pairs, best first.
    CSLS penalties use the first ``source_pool``/``target_pool`` words of each
    side (whole vocabularies by default).
    """
    query_indices = np.asarray(query_indices, dtype=np.int64)
    if query_indices.size and (query_indices.min() < 0 or query_indices.max() >= src.n):
        raise DataError(f"query index out of range [0, {src.n})")
    if topk < 1:
        raise ValueError("topk must be >= 1")
    M = _matrix_of(W)
    T = unit_rows(tgt.matrix.T)
    if isinstance(criterion, Csls):
        mapped = (M @ src.matrix).T
        r_src, r_tgt = csls_penalties(
            mapped, T, criterion.knn, source_pool, target_pool, query_indices, block_size
        )
        Q = unit_rows(mapped[query_indices])
    else:
        Q = unit_rows((M @ src.matrix[:, query_indices]).T)

    results = []
    for start in range(0, len(query_indices), block_size):
        S = Q[start : start + block_size] @ T.T
        if isinstance(criterion, Csls):
            S = 2.0 * S - r_src[start : start + block_size, None] - r_tgt[None, :]
        for row in S:
            best = rank_row(row, topk)
            results.append([(int(j), float(row[j])) for j in best])
    return results


@dataclass
class Prediction:
    source: str
    predicted: str
    score: float
    correct: bool


@dataclass
class EvaluationReport:
    accuracy: float
    total_queries: int
    correct: int
    criterion: str
    predictions: list[Prediction] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationReport":
        data = dict(data)
        data["predictions"] = [Prediction(**p) for p in data.get("predictions", [])]
        return cls(**data)


def evaluate_p1(
    W,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    test: MultiDictionary,
    criterion: RetrievalCriterion = Csls(10),
    source_pool: int | None = None,
    target_pool: int | None = None,
    block_size: int = DEFAULT_BLOCK,
) -> EvaluationReport:
    """Top-1 translation accuracy, one query per unique source word.

    A query is correct when its top prediction is any of the acceptable
    targets for that source word.
    """
    if len(test) == 0:
        raise DataError("empty test dictionary")
    queries = test.sources()
    ranked = translate_topk(W, src, tgt, queries, criterion, 1, source_pool, target_pool, block_size)
    predictions = []
    for i, hits in zip(queries, ranked):
        j, score = hits[0]
        predictions.append(Prediction(src.vocab[i], tgt.vocab[j], score, j in test.entries[i]))
    correct = sum(p.correct for p in predictions)
    return EvaluationReport(
        accuracy=correct / len(queries),
        total_queries=len(queries),
        correct=correct,
        criterion=str(criterion),
        predictions=predictions,
    )


# --------------------------------------------------------------------------
# monolingual checks


@dataclass(frozen=True)
class SimilarityDataset:
    pairs: tuple[tuple[str, str, float], ...]
    name: str = ""

    def __post_init__(self):
        if not self.pairs:
            raise DataError("similarity dataset is empty")
        if not all(np.isfinite(score) for _, _, score in self.pairs):
            raise DataError("similarity dataset has non-finite scores")


def load_similarity_dataset(stream: Iterable[str], name: str = "") -> SimilarityDataset:
    """Parse ``word_a word_b score`` lines; ``#`` lines are comments."""
    pairs = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) < 3:
            raise DataError(f"similarity line {lineno}: expected 'word word score'")
        try:
            score = float(tokens[2])
        except ValueError:
            raise DataError(f"similarity line {lineno}: bad score {tokens[2]!r}") from None
        pairs.append((tokens[0], tokens[1], score))
    return SimilarityDataset(tuple(pairs), name)


def spearman_wordsim(space: EmbeddingSpace, dataset: SimilarityDataset) -> tuple[float, int]:
    """Spearman correlation of cosine similarity with human scores.

    Pairs with an out-of-vocabulary word are skipped; returns ``(rho, covered)``.
    """
    ours, gold = [], []
    for a, b, score in dataset.pairs:
        if a in space and b in space:
            u, v = unit_rows(np.stack([space.vector(a), space.vector(b)]))
            ours.append(float(u @ v))
            gold.append(score)
    if not ours:
        raise DataError("no dataset pair is covered by the vocabulary")
    if len(ours) < 2:
        return float("nan"), len(ours)
    rho = spearmanr(ours, gold).statistic
    return float(rho), len(ours)


def nearest_words(space: EmbeddingSpace, word: str, k: int) -> list[tuple[str, float]]:
    """Top-``k`` cosine neighbors of ``word`` in its own space, itself excluded."""
    if word not in space:
        raise DataError(f"word {word!r} is not in the vocabulary")
    i = space.index[word]
    V = unit_rows(space.matrix.T)
    sims = V @ V[i]
    sims[i] = -np.inf
    k = min(k, space.n - 1)
    return [(space.vocab[j], float(sims[j])) for j in rank_row(sims, k)]


def neighborhood_report(
    space_a: EmbeddingSpace, space_b: EmbeddingSpace, word_a: str, word_b: str, k: int = 5
) -> tuple[list[tuple[str, float]], list[tuple[str, float]]]:
    return nearest_words(space_a, word_a, k), nearest_words(space_b, word_b, k)


def format_neighborhoods(title_a: str, list_a, title_b: str, list_b) -> str:
    width = max([len(title_a)] + [len(w) + 8 for w, _ in list_a]) + 4
    lines = [f"{title_a:<{width}}{title_b}"]
    for r in range(max(len(list_a), len(list_b))):
        left = f"{list_a[r][0]} {list_a[r][1]:.3f}" if r < len(list_a) else ""
        right = f"{list_b[r][0]} {list_b[r][1]:.3f}" if r < len(list_b) else ""
        lines.append(f"{left:<{width}}{right}")
    return "\n".join(lines)
