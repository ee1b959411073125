"""Slow, independent reference implementations used to check the library.

Nothing here imports xlign's numerical code; each oracle is the direct
textbook formula evaluated with loops or full sorts.
"""

import math

import numpy as np


def iternorm_loop(columns, rounds):
    """Hand alternation over a list of column vectors (plain Python floats)."""
    cols = [list(map(float, c)) for c in columns]
    history = []
    for _ in range(rounds):
        cols = [[v / math.sqrt(sum(t * t for t in c)) for v in c] for c in cols]
        d = len(cols[0])
        mean = [sum(c[k] for c in cols) / len(cols) for k in range(d)]
        cols = [[c[k] - mean[k] for k in range(d)] for c in cols]
        history.append([list(c) for c in cols])
    return history


def cosine(u, v):
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


def knn_mean_full_sort(query, pool_columns, k, exclude=None):
    sims = np.array([cosine(query, pool_columns[:, j]) for j in range(pool_columns.shape[1])])
    if exclude is not None:
        sims = np.delete(sims, exclude)
    top = np.sort(sims)[::-1][:k]
    return float(top.mean()), sims


def csls_brute(mapped_src_cols, tgt_cols, k):
    """Full CSLS matrix: rows are mapped sources, columns are targets."""
    n_s, n_t = mapped_src_cols.shape[1], tgt_cols.shape[1]
    cos = np.empty((n_s, n_t))
    for i in range(n_s):
        for j in range(n_t):
            cos[i, j] = cosine(mapped_src_cols[:, i], tgt_cols[:, j])
    r_t = np.array([np.sort(cos[i])[::-1][:k].mean() for i in range(n_s)])
    r_s = np.array([np.sort(cos[:, j])[::-1][:k].mean() for j in range(n_t)])
    return 2 * cos - r_t[:, None] - r_s[None, :]


def argmax_lowest_index(row):
    best = 0
    for j in range(1, len(row)):
        if row[j] > row[best]:
            best = j
    return best


def mutual_nn_brute(score_matrix):
    pairs = []
    for i in range(score_matrix.shape[0]):
        j = argmax_lowest_index(score_matrix[i])
        if argmax_lowest_index(score_matrix[:, j]) == i:
            pairs.append((i, j))
    return pairs


def rcsls_loss_formula(W, X, Z, pairs, n_t, n_s):
    """Per-pair evaluation of the RCSLS loss with given neighbor sets (column vectors)."""
    total = 0.0
    knn = len(n_t[0])
    for b, (i, j) in enumerate(pairs):
        wx = W @ X[:, i]
        term = -2.0 * wx @ Z[:, j]
        term += sum(wx @ Z[:, t] for t in n_t[b]) / knn
        term += sum((W @ X[:, s]) @ Z[:, j] for s in n_s[b]) / knn
        total += term
    return total / len(pairs)


def central_difference_grad(f, W, h=1e-5):
    G = np.zeros_like(W)
    for a in range(W.shape[0]):
        for b in range(W.shape[1]):
            E = np.zeros_like(W)
            E[a, b] = h
            G[a, b] = (f(W + E) - f(W - E)) / (2 * h)
    return G


def average_ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman_brute(a, b):
    ra, rb = average_ranks(a), average_ranks(b)
    ma, mb = sum(ra) / len(ra), sum(rb) / len(rb)
    cov = sum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    va = sum((x - ma) ** 2 for x in ra)
    vb = sum((y - mb) ** 2 for y in rb)
    return cov / math.sqrt(va * vb)


def random_orthogonal(d, rng):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def csls_full_sort(mapped_src_cols, tgt_cols, k):
    """Vectorized CSLS matrix using full sorts; for sizes where loops are too slow."""
    S = mapped_src_cols / np.linalg.norm(mapped_src_cols, axis=0)
    T = tgt_cols / np.linalg.norm(tgt_cols, axis=0)
    cos = S.T @ T
    r_t = np.sort(cos, axis=1)[:, ::-1][:, :k].mean(axis=1)
    r_s = np.sort(cos, axis=0)[::-1][:k].mean(axis=0)
    return 2 * cos - r_t[:, None] - r_s[None, :]
