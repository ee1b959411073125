import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import argmax_lowest_index, csls_brute, knn_mean_full_sort, random_orthogonal, spearman_brute
from xlign.embeddings import EmbeddingSpace, MultiDictionary
from xlign.errors import DataError
from xlign.retrieval import (
    Csls,
    EvaluationReport,
    NearestNeighbor,
    SimilarityDataset,
    csls_scores,
    evaluate_p1,
    format_neighborhoods,
    knn_mean_similarities,
    knn_mean_similarity,
    load_similarity_dataset,
    nearest_words,
    parse_criterion,
    rank_row,
    spearman_wordsim,
    top_k_mean,
    translate_topk,
)


def sp(matrix, prefix="w"):
    matrix = np.asarray(matrix, float)
    return EmbeddingSpace(tuple(f"{prefix}{i}" for i in range(matrix.shape[1])), matrix)


def test_knn_mean_examples():
    assert knn_mean_similarity([1, 0], sp([[1, 0], [0, 1]]), 1) == 1.0
    assert knn_mean_similarity([1, 0], sp([[1, 0], [0, 1]]), 2) == 0.5


def test_knn_mean_exclusion():
    pool = sp([[1, 0.8, 0], [0, 0.6, 1]])
    assert knn_mean_similarity([1, 0], pool, 1, exclude_index=0) == pytest.approx(0.8)


def test_knn_mean_matches_full_sort():
    rng = np.random.default_rng(0)
    pool = rng.standard_normal((20, 500))
    for q in rng.standard_normal((5, 20)):
        expected, _ = knn_mean_full_sort(q, pool, 10)
        assert knn_mean_similarity(q, sp(pool), 10) == pytest.approx(expected, abs=1e-12)


def test_knn_mean_k_out_of_range():
    with pytest.raises(ValueError):
        knn_mean_similarity([1, 0], sp(np.eye(2)), 3)
    with pytest.raises(DataError):
        knn_mean_similarity([np.nan, 0], sp(np.eye(2)), 1)


def test_top_k_mean_blocks_agree():
    rng = np.random.default_rng(1)
    Q, P = rng.standard_normal((700, 8)), rng.standard_normal((300, 8))
    a = knn_mean_similarities(Q, P, 10, block_size=512)
    b = knn_mean_similarities(Q, P, 10, block_size=64)
    # BLAS may block the product differently; at most an ulp apart
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)
    S = rng.standard_normal((4, 50))
    np.testing.assert_array_equal(top_k_mean(S, 7), np.sort(S, axis=1)[:, ::-1][:, :7].mean(axis=1))


def test_csls_hand_example():
    tgt = sp(np.eye(2))
    np.testing.assert_allclose(csls_scores([1, 0], tgt, 0.5, [0.5, 0.5]), [1.0, -1.0])
    np.testing.assert_allclose(csls_scores([1, 0], tgt, 1.0, [1.0, 0.0]), [0.0, -1.0])


def test_csls_shape_check():
    with pytest.raises(DataError):
        csls_scores([1, 0, 0], sp(np.eye(2)), 0.0, [0, 0])


def test_rank_row_ties():
    assert list(rank_row(np.array([1.0, 3.0, 3.0, 2.0]), 2)) == [1, 2]
    assert list(rank_row(np.array([0.0, 0.0, 0.0]), 3)) == [0, 1, 2]
    row = np.array([5.0, 1.0, 5.0, 5.0, 0.0])
    assert list(rank_row(row, 1)) == [argmax_lowest_index(row)]


def test_translate_matches_brute_csls():
    rng = np.random.default_rng(2)
    X, Z = rng.standard_normal((8, 60)), rng.standard_normal((8, 70))
    W = random_orthogonal(8, rng)
    ranked = translate_topk(W, sp(X), sp(Z), range(60), Csls(10), topk=3)
    brute = csls_brute(W @ X, Z, 10)
    for i, hits in enumerate(ranked):
        assert [j for j, _ in hits] == list(np.argsort(-brute[i], kind="stable")[:3])
        np.testing.assert_allclose([s for _, s in hits], np.sort(brute[i])[::-1][:3], atol=1e-12)


def test_constant_penalties_reduce_to_cosine():
    rng = np.random.default_rng(3)
    tgt = sp(rng.standard_normal((5, 30)))
    q = rng.standard_normal(5)
    scores = csls_scores(q, tgt, 0.3, np.full(30, 0.2))
    cos = np.array([q @ tgt.matrix[:, j] / np.linalg.norm(q) / np.linalg.norm(tgt.matrix[:, j]) for j in range(30)])
    assert list(rank_row(scores, 30)) == list(rank_row(cos, 30))


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 8), st.integers(0, 2**31))
def test_csls_rotation_invariance(d, seed):
    rng = np.random.default_rng(seed)
    X, Z = rng.standard_normal((d, 25)), rng.standard_normal((d, 25))
    W, R = random_orthogonal(d, rng), random_orthogonal(d, rng)
    a = translate_topk(W, sp(X), sp(Z), range(25), Csls(5))
    b = translate_topk(R @ W, sp(X), sp(R @ Z), range(25), Csls(5))
    # top scores agree; indices may differ only on exact ties
    for (_, sa), (_, sb) in zip((h[0] for h in a), (h[0] for h in b)):
        assert abs(sa - sb) <= 1e-10
    brute_a, brute_b = csls_brute(W @ X, Z, 5), csls_brute(R @ W @ X, R @ Z, 5)
    assert np.max(np.abs(brute_a - brute_b)) <= 1e-10


def test_hub_is_demoted_by_csls():
    # target 0 sits near every query; each query also has a true partner
    queries = np.array([[1.0, 0.5, 0.0, 0.0], [1.0, 0.0, 0.5, 0.0], [1.0, 0.0, 0.0, 0.5]]).T
    targets = np.array(
        [[1.0, 0.0, 0.0, 0.0], [0.6, 1.0, 0.0, 0.0], [0.6, 0.0, 1.0, 0.0], [0.6, 0.0, 0.0, 1.0]]
    ).T
    src, tgt = sp(queries), sp(targets)
    nn = [h[0][0] for h in translate_topk(np.eye(4), src, tgt, range(3), NearestNeighbor())]
    cs = [h[0][0] for h in translate_topk(np.eye(4), src, tgt, range(3), Csls(3))]
    assert nn == [0, 0, 0]
    assert cs == [1, 2, 3]


def test_evaluate_identity_is_perfect():
    rng = np.random.default_rng(4)
    X = sp(rng.standard_normal((10, 100)))
    test = MultiDictionary({i: frozenset([i]) for i in range(0, 100, 3)})
    for criterion in (NearestNeighbor(), Csls(10)):
        report = evaluate_p1(np.eye(10), X, X, test, criterion)
        assert report.accuracy == 1.0 and report.total_queries == 34


def test_evaluate_random_map_near_chance():
    rng = np.random.default_rng(5)
    n = 1000
    X, Z = sp(rng.standard_normal((50, n))), sp(rng.standard_normal((50, n)))
    test = MultiDictionary({i: frozenset([i]) for i in range(n)})
    assert evaluate_p1(random_orthogonal(50, rng), X, Z, test).accuracy < 5 / n


def test_evaluate_multiple_targets_and_report_round_trip():
    src, tgt = sp(np.eye(2)), sp(np.array([[0, 1], [1, 0.0], [1, 0.1]]).T)
    test = MultiDictionary({0: frozenset({1, 2}), 1: frozenset({2})})
    report = evaluate_p1(np.eye(2), src, tgt, test, NearestNeighbor())
    assert report.correct == 1 and report.accuracy == 0.5
    assert report.predictions[0].predicted == "w1"
    assert EvaluationReport.from_dict(report.to_dict()) == report


def test_evaluate_empty_test():
    with pytest.raises(DataError):
        evaluate_p1(np.eye(2), sp(np.eye(2)), sp(np.eye(2)), MultiDictionary({}))


def test_parse_criterion():
    assert parse_criterion("NN") == NearestNeighbor()
    assert parse_criterion("csls", 5) == Csls(5)
    with pytest.raises(ValueError):
        parse_criterion("cosine")


# --------------------------------------------------------------------------
# monolingual checks


def test_spearman_perfect_and_reversed():
    X = sp(np.array([[1, 0], [1, 0.1], [1, 1], [0, 1]]).T)
    up = SimilarityDataset((("w0", "w1", 9.0), ("w0", "w2", 5.0), ("w0", "w3", 1.0)))
    down = SimilarityDataset((("w0", "w1", 1.0), ("w0", "w2", 5.0), ("w0", "w3", 9.0)))
    assert spearman_wordsim(X, up) == (pytest.approx(1.0), 3)
    assert spearman_wordsim(X, down) == (pytest.approx(-1.0), 3)


def test_spearman_matches_brute_force_with_ties_and_oov():
    rng = np.random.default_rng(6)
    X = sp(rng.standard_normal((6, 30)))
    rows = [(f"w{a}", f"w{b}", float(rng.integers(0, 4))) for a, b in rng.integers(0, 30, (40, 2))]
    rows.append(("w0", "unknown", 2.0))
    rho, covered = spearman_wordsim(X, SimilarityDataset(tuple(rows)))
    assert covered == 40
    ours = []
    for a, b, _ in rows[:40]:
        u, v = X.vector(a), X.vector(b)
        ours.append(u @ v / np.linalg.norm(u) / np.linalg.norm(v))
    assert rho == pytest.approx(spearman_brute(ours, [r[2] for r in rows[:40]]), abs=1e-12)


def test_similarity_file_parsing():
    ds = load_similarity_dataset(io.StringIO("# header\ntiger cat 7.35\n\nbook paper 7.46\n"), "ws")
    assert ds.pairs == (("tiger", "cat", 7.35), ("book", "paper", 7.46))
    with pytest.raises(DataError):
        load_similarity_dataset(io.StringIO("a b\n"))
    with pytest.raises(DataError):
        load_similarity_dataset(io.StringIO("a b x\n"))


def test_spearman_no_coverage():
    with pytest.raises(DataError):
        spearman_wordsim(sp(np.eye(2)), SimilarityDataset((("x", "y", 1.0),)))


def test_nearest_words_duplicate_vector_first():
    X = sp(np.array([[1, 0.2], [0, 1], [1, 0.2], [1, 0.5]]).T)
    hits = nearest_words(X, "w0", 3)
    assert [w for w, _ in hits] == ["w2", "w3", "w1"]
    assert hits[0][1] == pytest.approx(1.0)
    assert all(w != "w0" for w, _ in hits)


def test_nearest_words_matches_brute_force():
    rng = np.random.default_rng(7)
    X = sp(rng.standard_normal((5, 80)))
    hits = nearest_words(X, "w11", 5)
    _, sims = knn_mean_full_sort(X.vector("w11"), X.matrix, 1)
    sims[11] = -np.inf
    assert [w for w, _ in hits] == [f"w{j}" for j in np.argsort(-sims, kind="stable")[:5]]


def test_nearest_words_unknown():
    with pytest.raises(DataError):
        nearest_words(sp(np.eye(2)), "zz", 1)


def test_format_neighborhoods():
    text = format_neighborhoods("a", [("x", 0.5)], "b", [("y", 0.25), ("z", 0.125)])
    lines = text.splitlines()
    assert len(lines) == 3 and "0.500" in lines[1] and "0.125" in lines[2]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_unit_vectors_dot_cosine_euclid(d, seed):
    # for unit vectors, ranking by dot, cosine and -distance coincide
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((d, 20))
    T /= np.linalg.norm(T, axis=0)
    q = rng.standard_normal(d)
    q /= np.linalg.norm(q)
    dots = T.T @ q
    dist = np.linalg.norm(T - q[:, None], axis=0)
    np.testing.assert_allclose(dist**2, 2 - 2 * dots, atol=1e-12)
    nn = translate_topk(np.eye(d), sp(q[:, None]), sp(T), [0], NearestNeighbor())[0][0]
    assert nn[0] == int(np.argmin(dist))
