"""DTW alignment and sliding-window keyword search.

Frame similarity is offset cosine, 0.5 * (cos(x, y) + 1), which lies in
[0, 1] and equals 1 for identical frames. Alignment similarity between two
sequences is

    1 - min over monotone paths of (mean per-cell cost along the path)

with per-cell cost d = 1 - frame_similarity and the symmetric step set
{(1,0), (0,1), (1,1)}. The minimum is taken over paths of every feasible
length, computed exactly by a dynamic programme indexed by (cells-on-path,
i, j). This guarantees similarity in [0, 1] and exactly 1 for an exact
match, and is checked against exhaustive path enumeration in the tests.

Two implementations are provided:

* a plain numpy reference (`dtw_align`, `sweep_template`, `score_utterance`)
  used for single items and for runtime benchmarking, and
* a numba batch engine behind `batch_score`, bit-identical to the reference
  (same float64 operations in the same order), parallel over
  (template, window) pairs within an utterance.
"""

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DataError, ShapeError
from .features import FeatureSequence


@dataclass
class KeywordTemplate:
    """A labelled isolated-keyword recording used as a search query."""

    features: FeatureSequence
    keyword_id: int
    template_id: int = 0
    speaker_id: str = ""

    def __post_init__(self):
        if self.keyword_id < 0:
            raise DataError(f"keyword_id must be >= 0, got {self.keyword_id}")


@dataclass
class ScoreVector:
    """Per-keyword-type similarity scores in [0, 1] for one utterance."""

    scores: np.ndarray
    utterance_id: str = ""

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 1:
            raise ShapeError("scores must be a 1-D vector")
        if np.any(self.scores < 0.0) or np.any(self.scores > 1.0):
            raise DataError("scores must lie in [0, 1]")


@dataclass
class SearchConfig:
    """Sliding-window search parameters. Window length equals the template.

    `band` is an optional Sakoe-Chiba band half-width for performance
    experiments; None (the default, used everywhere in the shipped pipeline)
    means unconstrained alignment.
    """

    frame_skip: int = 3
    band: int | None = None

    def __post_init__(self):
        if self.frame_skip < 1:
            raise DataError(f"frame_skip must be >= 1, got {self.frame_skip}")


def frame_similarity(x, y):
    """Offset cosine similarity of two vectors: 0.5 * (cos + 1) in [0, 1].

    Identical (bitwise equal) vectors score exactly 1.0. If either vector
    has zero norm the cosine is taken as 0 and the result is 0.5.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"expected equal-length vectors, got {x.shape} and {y.shape}")
    if np.array_equal(x, y, equal_nan=False) and x.shape[0] > 0:
        return 1.0
    nx = np.sqrt(np.dot(x, x))
    ny = np.sqrt(np.dot(y, y))
    if nx == 0.0 or ny == 0.0:
        return 0.5
    cos = np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0)
    return 0.5 * (cos + 1.0)


def similarity_matrix(x_frames, y_frames):
    """All-pairs frame similarity between two T x D frame arrays.

    Rows with zero norm behave as cosine 0 (similarity 0.5). Entries within
    1e-9 of 1 are re-checked for bitwise equality and snapped to exactly 1.0
    so that exact matches survive floating-point normalisation.
    """
    x = np.asarray(x_frames, dtype=np.float64)
    y = np.asarray(y_frames, dtype=np.float64)
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"feature dim mismatch: {x.shape[1]} vs {y.shape[1]}")
    xn = np.linalg.norm(x, axis=1)
    yn = np.linalg.norm(y, axis=1)
    xs = np.where(xn == 0.0, 1.0, xn)
    ys = np.where(yn == 0.0, 1.0, yn)
    cos = np.clip((x / xs[:, None]) @ (y / ys[:, None]).T, -1.0, 1.0)
    cos[xn == 0.0, :] = 0.0
    cos[:, yn == 0.0] = 0.0
    sim = 0.5 * (cos + 1.0)
    near = np.argwhere(sim > 1.0 - 1e-9)
    for i, j in near:
        if np.array_equal(x[i], y[j]):
            sim[i, j] = 1.0
    return sim


def _apply_band(cost, band):
    m, n = cost.shape
    if band is None or (m == 1 and n == 1):
        return cost
    i = np.arange(m, dtype=np.float64)
    j = np.arange(n, dtype=np.float64)
    # map both indices onto the longer axis before comparing
    ii = i * ((n - 1) / (m - 1)) if m > 1 else i
    off = np.abs(ii[:, None] - j[None, :])
    out = cost.copy()
    out[off > band] = np.inf
    return out


def _normalized_cost(cost):
    """Min over monotone paths of (path cost sum / path cell count).

    Two-plane dynamic programme over exact path length; O(M*N*(M+N)).
    """
    m, n = cost.shape
    prev = np.full((m, n), np.inf)
    prev[0, 0] = cost[0, 0]
    best = prev[m - 1, n - 1] / 1.0
    for length in range(2, m + n):
        cand = np.full((m, n), np.inf)
        cand[1:, :] = prev[:-1, :]
        np.minimum(cand[:, 1:], prev[:, :-1], out=cand[:, 1:])
        np.minimum(cand[1:, 1:], prev[:-1, :-1], out=cand[1:, 1:])
        cur = cand + cost
        end = cur[m - 1, n - 1]
        if end / length < best:
            best = end / length
        prev = cur
    return best


@dataclass
class DtwAlignment:
    similarity: float
    path: np.ndarray  # (L, 2) int array of (i, j) pairs, (0,0) .. (M-1,N-1)


def dtw_align(x, y, band=None):
    """Align two FeatureSequences (or frame arrays); return similarity + path.

    The returned path is the arg-optimum of the normalized cost; among
    optimal paths, ties are broken deterministically by preferring the
    shortest feasible length and then, stepping backwards from the end,
    diagonal over vertical over horizontal predecessors.
    """
    xf = x.frames if isinstance(x, FeatureSequence) else np.asarray(x)
    yf = y.frames if isinstance(y, FeatureSequence) else np.asarray(y)
    m, n = xf.shape[0], yf.shape[0]
    cost = _apply_band(1.0 - similarity_matrix(xf, yf), band)

    n_lengths = m + n - 1
    acc = np.full((n_lengths, m, n), np.inf)
    acc[0, 0, 0] = cost[0, 0]
    for li in range(1, n_lengths):
        prev = acc[li - 1]
        cand = acc[li]
        cand[1:, :] = prev[:-1, :]
        np.minimum(cand[:, 1:], prev[:, :-1], out=cand[:, 1:])
        np.minimum(cand[1:, 1:], prev[:-1, :-1], out=cand[1:, 1:])
        cand += cost
        cand[0, 0] = np.inf

    lengths = np.arange(1, n_lengths + 1, dtype=np.float64)
    ratios = acc[:, m - 1, n - 1] / lengths
    li_best = int(np.argmin(ratios))  # argmin takes the first = shortest on ties
    best = ratios[li_best]

    path = [(m - 1, n - 1)]
    i, j = m - 1, n - 1
    for li in range(li_best, 0, -1):
        target = acc[li, i, j]
        prev = acc[li - 1]
        if i > 0 and j > 0 and cost[i, j] + prev[i - 1, j - 1] == target:
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] + prev[i - 1, j] == target:
            i = i - 1
        else:
            j = j - 1
        path.append((i, j))
    path.reverse()

    similarity = float(min(max(1.0 - best, 0.0), 1.0))
    return DtwAlignment(similarity, np.asarray(path, dtype=np.int64))


def window_starts(n_frames, template_len, skip):
    """Start offsets of the sliding search windows (0-based).

    When the utterance is shorter than the template the whole utterance is
    the single window; otherwise starts advance by `skip` up to the final
    (possibly partial) window.
    """
    if n_frames < template_len:
        return [0]
    return list(range(0, n_frames, skip))


def sweep_template(template, utterance, cfg=None):
    """Best DTW similarity of a template over all sliding windows."""
    cfg = cfg or SearchConfig()
    tf = template.features.frames
    uf = utterance.frames if isinstance(utterance, FeatureSequence) else np.asarray(utterance)
    if tf.shape[1] != uf.shape[1]:
        raise ShapeError(f"feature dim mismatch: template {tf.shape[1]} vs utterance {uf.shape[1]}")
    m, n = tf.shape[0], uf.shape[0]
    sim = similarity_matrix(tf, uf)
    best = 0.0
    for q in window_starts(n, m, cfg.frame_skip):
        cost = _apply_band(1.0 - sim[:, q : min(q + m, n)], cfg.band)
        value = 1.0 - _normalized_cost(cost)
        if value > best:
            best = value
    return float(min(max(best, 0.0), 1.0))


def _keyword_inventory(templates, n_keywords=None):
    ids = [t.keyword_id for t in templates]
    if n_keywords is None:
        n_keywords = max(ids) + 1 if ids else 0
    by_type = {k: [] for k in range(n_keywords)}
    for t in templates:
        if t.keyword_id >= n_keywords:
            raise DataError(f"template keyword_id {t.keyword_id} outside inventory of {n_keywords}")
        by_type[t.keyword_id].append(t)
    missing = [k for k, ts in by_type.items() if not ts]
    if missing:
        raise DataError(f"keyword types without templates: {missing}")
    return by_type


def score_utterance(templates, utterance, cfg=None, n_keywords=None, utterance_id=""):
    """Per-keyword max similarity over all templates and windows (reference)."""
    cfg = cfg or SearchConfig()
    by_type = _keyword_inventory(templates, n_keywords)
    scores = np.zeros(len(by_type))
    for k, tpls in sorted(by_type.items()):
        scores[k] = max(sweep_template(t, utterance, cfg) for t in tpls)
    return ScoreVector(scores, utterance_id)


@numba.njit(cache=True, nogil=True)
def _window_value(sim, q0, q1):
    """Normalized-cost DP on the window sim[:, q0:q1]; mirrors _normalized_cost.

    Performs the identical float64 additions and minima as the numpy
    reference so results are bit-identical.
    """
    m = sim.shape[0]
    w = q1 - q0
    prev = np.full((m, w), np.inf)
    cur = np.empty((m, w))
    prev[0, 0] = 1.0 - sim[0, q0]
    best = prev[m - 1, w - 1] / 1.0
    for length in range(2, m + w):
        for i in range(m):
            for j in range(w):
                b = np.inf
                if i > 0:
                    b = prev[i - 1, j]
                if j > 0 and prev[i, j - 1] < b:
                    b = prev[i, j - 1]
                if i > 0 and j > 0 and prev[i - 1, j - 1] < b:
                    b = prev[i - 1, j - 1]
                cur[i, j] = b + (1.0 - sim[i, q0 + j])
        end = cur[m - 1, w - 1]
        if end / length < best:
            best = end / length
        tmp = prev
        prev = cur
        cur = tmp
    value = 1.0 - best
    if value < 0.0:
        value = 0.0
    elif value > 1.0:
        value = 1.0
    return value


@numba.njit(cache=True, nogil=True, parallel=True)
def _sweep_all(sim_all, offsets, lengths, n_frames, skip, n_windows, values):
    n_templates = offsets.shape[0]
    for task in numba.prange(n_templates * n_windows):
        ti = task // n_windows
        wi = task % n_windows
        m = lengths[ti]
        if n_frames < m:
            if wi == 0:
                q0 = 0
                q1 = n_frames
            else:
                values[task] = 0.0
                continue
        else:
            q0 = wi * skip
            if q0 >= n_frames:
                values[task] = 0.0
                continue
            q1 = min(q0 + m, n_frames)
        sub = sim_all[offsets[ti] : offsets[ti] + m]
        values[task] = _window_value(sub, q0, q1)


def batch_score(templates, utterances, cfg=None, n_keywords=None):
    """Score a collection of (utterance_id, FeatureSequence) pairs.

    Numba engine path: order-preserving, deterministic, and bit-identical
    to looping `score_utterance` (asserted in the tests). Parallelises over
    (template, window) pairs inside each utterance. Falls back to the
    reference implementation when a band constraint is requested.
    """
    cfg = cfg or SearchConfig()
    items = list(utterances)
    if cfg.band is not None:
        return [
            score_utterance(templates, feats, cfg, n_keywords, utterance_id=uid)
            for uid, feats in items
        ]
    by_type = _keyword_inventory(templates, n_keywords)
    ordered = [t for k in sorted(by_type) for t in by_type[k]]
    kw_of = np.asarray([t.keyword_id for t in ordered], dtype=np.int64)
    lengths = np.asarray([t.features.num_frames for t in ordered], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)
    stacked = np.concatenate([t.features.frames for t in ordered], axis=0)

    results = []
    for uid, feats in items:
        uf = feats.frames if isinstance(feats, FeatureSequence) else np.asarray(feats)
        try:
            sim_all = similarity_matrix(stacked, uf)
            n = uf.shape[0]
            # templates longer than the utterance get the single whole-utterance
            # window; shorter ones sweep every skip-aligned start
            n_windows = len(window_starts(n, int(lengths.min()), cfg.frame_skip))
            values = np.zeros(len(ordered) * n_windows)
            _sweep_all(sim_all, offsets, lengths, n, cfg.frame_skip, n_windows, values)
            values = values.reshape(len(ordered), n_windows)
            scores = np.zeros(len(by_type))
            for ti in range(len(ordered)):
                v = values[ti].max()
                if v > scores[kw_of[ti]]:
                    scores[kw_of[ti]] = v
            results.append(ScoreVector(scores, uid))
        except Exception as exc:
            raise DataError(f"utterance {uid!r}: {exc}") from exc
    return results
