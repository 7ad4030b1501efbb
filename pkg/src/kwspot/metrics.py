"""Keyword-spotting metrics: ROC, AUC, EER, P@10, P@N.

Scores are ranked descending; ties in ranking are broken by utterance_id so
results are deterministic. AUC uses trapezoidal integration over the ROC,
which credits score ties with 1/2 (equivalent to the Mann-Whitney rank
statistic — asserted against a rank oracle in the tests). EER is read off
the ROC polyline at the FPR = FNR crossing, linearly interpolated between
the bracketing operating points.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class LabeledScores:
    """Per keyword type: a list of (utterance_id, score in [0,1], label 0/1)."""

    by_keyword: dict  # keyword id or name -> list[(utterance_id, score, label)]

    def pooled(self):
        out = []
        for kw, items in sorted(self.by_keyword.items(), key=lambda kv: str(kv[0])):
            out.extend((f"{kw}:{uid}", s, lab) for uid, s, lab in items)
        return out

    def keyword_items(self, kw):
        return self.by_keyword[kw]


def _split(items, context=""):
    scores = np.asarray([s for _, s, _ in items], dtype=np.float64)
    labels = np.asarray([int(lab) for _, _, lab in items], dtype=np.int64)
    if labels.sum() == 0 or labels.sum() == len(labels):
        raise DataError(f"degenerate label set{context}: need at least one positive and one negative")
    return scores, labels


def roc_points(scores, labels):
    """Operating points (threshold, FPR, TPR) at every distinct score,
    preceded by the (inf, 0, 0) corner; the final point is (min-score, 1, 1)."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    lab = labels[order]
    n_pos = lab.sum()
    n_neg = len(lab) - n_pos
    tp = np.cumsum(lab)
    fp = np.cumsum(1 - lab)
    distinct = np.nonzero(np.diff(s, append=-np.inf))[0]  # last index of each tie group
    thresholds = np.concatenate([[np.inf], s[distinct]])
    tpr = np.concatenate([[0.0], tp[distinct] / n_pos])
    fpr = np.concatenate([[0.0], fp[distinct] / n_neg])
    return thresholds, fpr, tpr


def _auc(scores, labels):
    _, fpr, tpr = roc_points(scores, labels)
    return float(np.trapezoid(tpr, fpr))


def roc_auc(scored, mode="pooled"):
    """AUC of a LabeledScores collection.

    mode="pooled" merges every (keyword, utterance) pair into one ranking
    and returns a float; mode="per_keyword" returns {keyword: auc}.
    """
    if mode == "pooled":
        return _auc(*_split(scored.pooled()))
    if mode == "per_keyword":
        out = {}
        for kw in sorted(scored.by_keyword, key=str):
            out[kw] = _auc(*_split(scored.keyword_items(kw), context=f" for keyword {kw!r}"))
        return out
    raise DataError(f"unknown AUC mode {mode!r}")


def _eer(scores, labels):
    _, fpr, tpr = roc_points(scores, labels)
    fnr = 1.0 - tpr
    diff = fpr - fnr  # monotone non-decreasing along the curve
    for i in range(len(diff) - 1):
        if diff[i] <= 0.0 <= diff[i + 1]:
            if diff[i + 1] == diff[i]:
                return float(fpr[i])
            t = -diff[i] / (diff[i + 1] - diff[i])
            return float(fpr[i] + t * (fpr[i + 1] - fpr[i]))
    return float(fpr[-1] if diff[-1] < 0 else fpr[0])


def eer(scored, mode="pooled"):
    """Equal error rate: the rate where FPR equals FNR on the ROC polyline."""
    if mode == "pooled":
        return _eer(*_split(scored.pooled()))
    if mode == "per_keyword":
        return {
            kw: _eer(*_split(scored.keyword_items(kw), context=f" for keyword {kw!r}"))
            for kw in sorted(scored.by_keyword, key=str)
        }
    raise DataError(f"unknown EER mode {mode!r}")


def precision_at(scored, cutoff):
    """Precision among the top-ranked utterances per keyword, plus the
    unweighted average over keyword types.

    `cutoff` is an integer (e.g. 10) or the string "N", meaning each
    keyword's true occurrence count. Lists shorter than the cutoff clamp it
    with a warning; for "N", keywords with zero occurrences are excluded
    from the average with a warning.
    """
    per_keyword = {}
    for kw in sorted(scored.by_keyword, key=str):
        items = scored.keyword_items(kw)
        ranked = sorted(items, key=lambda r: (-r[1], str(r[0])))
        if cutoff == "N":
            c = sum(int(lab) for _, _, lab in items)
            if c == 0:
                warnings.warn(f"keyword {kw!r} has no true occurrences; excluded from P@N")
                continue
        else:
            c = int(cutoff)
            if c > len(ranked):
                warnings.warn(f"keyword {kw!r} has only {len(ranked)} items; clamping cutoff {c}")
                c = len(ranked)
        top = ranked[:c]
        per_keyword[kw] = sum(int(lab) for _, _, lab in top) / c
    average = float(np.mean(list(per_keyword.values()))) if per_keyword else 0.0
    return per_keyword, average


@dataclass
class EvalReport:
    pooled_auc: float
    pooled_eer: float
    per_keyword_auc: dict
    per_keyword_eer: dict
    p_at_10: dict
    avg_p_at_10: float
    p_at_n: dict
    avg_p_at_n: float
    roc: tuple = field(repr=False, default=None)  # (thresholds, fpr, tpr) pooled

    def lines(self):
        out = [
            f"pooled_auc\t{self.pooled_auc:.9g}",
            f"pooled_eer\t{self.pooled_eer:.9g}",
            f"avg_p_at_10\t{self.avg_p_at_10:.9g}",
            f"avg_p_at_n\t{self.avg_p_at_n:.9g}",
        ]
        for kw in sorted(self.per_keyword_auc, key=str):
            out.append(
                f"keyword\t{kw}\tauc\t{self.per_keyword_auc[kw]:.9g}"
                f"\teer\t{self.per_keyword_eer[kw]:.9g}"
                f"\tp@10\t{self.p_at_10.get(kw, float('nan')):.9g}"
                f"\tp@n\t{self.p_at_n.get(kw, float('nan')):.9g}"
            )
        return out

    def write(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(self.lines()) + "\n")

    def write_roc_csv(self, path):
        thresholds, fpr, tpr = self.roc
        with open(path, "w", encoding="utf-8") as f:
            f.write("threshold,fpr,tpr\n")
            for t, x, y in zip(thresholds, fpr, tpr):
                f.write(f"{t:.9g},{x:.9g},{y:.9g}\n")


def evaluate(scored):
    """Full metric sweep over a LabeledScores collection."""
    pooled_items = scored.pooled()
    scores, labels = _split(pooled_items)
    p10, avg10 = precision_at(scored, 10)
    pn, avgn = precision_at(scored, "N")
    return EvalReport(
        pooled_auc=_auc(scores, labels),
        pooled_eer=_eer(scores, labels),
        per_keyword_auc=roc_auc(scored, "per_keyword"),
        per_keyword_eer=eer(scored, "per_keyword"),
        p_at_10=p10,
        avg_p_at_10=avg10,
        p_at_n=pn,
        avg_p_at_n=avgn,
        roc=roc_points(scores, labels),
    )
