"""Independent brute-force oracles used by the test suite.

These deliberately share no code with the implementations they check:
alignment scores come from exhaustive path enumeration, AUC from the rank
statistic, and similarity from a direct formula.
"""

import math

import numpy as np


def oracle_frame_similarity(x, y):
    dot = sum(a * b for a, b in zip(x, y))
    nx = math.sqrt(sum(a * a for a in x))
    ny = math.sqrt(sum(b * b for b in y))
    if nx == 0.0 or ny == 0.0:
        return 0.5
    c = max(-1.0, min(1.0, dot / (nx * ny)))
    return 0.5 * (c + 1.0)


def enumerate_paths(m, n):
    """Every monotone path from (0,0) to (m-1,n-1) with steps right/down/diag."""
    paths = []

    def walk(i, j, acc):
        if i == m - 1 and j == n - 1:
            paths.append(list(acc))
            return
        if i + 1 < m:
            acc.append((i + 1, j))
            walk(i + 1, j, acc)
            acc.pop()
        if j + 1 < n:
            acc.append((i, j + 1))
            walk(i, j + 1, acc)
            acc.pop()
        if i + 1 < m and j + 1 < n:
            acc.append((i + 1, j + 1))
            walk(i + 1, j + 1, acc)
            acc.pop()

    walk(0, 0, [(0, 0)])
    return paths


def oracle_dtw_similarity(x, y):
    """1 - min over all monotone paths of mean per-cell (1 - similarity)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m, n = x.shape[0], y.shape[0]
    cost = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            cost[i, j] = 1.0 - oracle_frame_similarity(x[i], y[j])
    best = math.inf
    for path in enumerate_paths(m, n):
        total = sum(cost[i, j] for i, j in path)
        best = min(best, total / len(path))
    return 1.0 - best


def oracle_sweep(template, utterance, skip):
    """Brute-force sliding-window search using the enumeration oracle."""
    t = np.asarray(template, dtype=np.float64)
    u = np.asarray(utterance, dtype=np.float64)
    m, n = t.shape[0], u.shape[0]
    if n < m:
        return oracle_dtw_similarity(t, u)
    best = 0.0
    for q in range(0, n, skip):
        best = max(best, oracle_dtw_similarity(t, u[q : min(q + m, n)]))
    return best


def oracle_auc(scores, labels):
    """AUC as the Mann-Whitney rank statistic with half credit for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))
