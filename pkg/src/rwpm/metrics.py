"""Pixel-level anomaly metrics: AUROC, AP and FPR at 95% TPR.

Outlier pixels (label 1) are positives, inliers (label 0) negatives, and
ignore pixels (label 255) are dropped. Every distinct score is a threshold
(``score >= t`` predicts outlier); AUROC gives tied pairs half credit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import EvaluationError, SizeError, TensorDataError
from .tensor_io import IGNORE, INLIER, OUTLIER

TPR_TARGET_PERCENT = 95


@dataclass(frozen=True)
class EvalResult:
    auroc: float
    ap: float
    fpr95: float
    n_pos: int
    n_neg: int

    def line(self) -> str:
        return (f"auroc={self.auroc:.6f} ap={self.ap:.6f} fpr95={self.fpr95:.6f} "
                f"n_pos={self.n_pos} n_neg={self.n_neg}")

    def to_keyvalue(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in asdict(self).items())


def _prepare(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise SizeError(f"scores {scores.shape} and labels {labels.shape} differ in shape")
    keep = labels.ravel() != IGNORE
    s = scores.ravel()[keep]
    y = labels.ravel()[keep]
    if np.isnan(s).any():
        raise TensorDataError("NaN anomaly score")
    if not np.isin(y, (INLIER, OUTLIER)).all():
        raise TensorDataError("labels must be 0, 1 or 255")
    pos = y == OUTLIER
    if pos.all() or not pos.any():
        raise EvaluationError(f"need both outlier and inlier pixels, got {int(pos.sum())} outliers "
                              f"and {int((~pos).sum())} inliers")
    return s, pos


def _reaches_target(tp, n_pos) -> np.ndarray:
    # integer form of tp / n_pos >= 0.95
    return np.asarray(tp) * 100 >= TPR_TARGET_PERCENT * n_pos


def _summarize(tp: np.ndarray, fp: np.ndarray, n_pos: int, n_neg: int) -> tuple[float, float, float]:
    """Metrics from cumulative counts at thresholds in decreasing order."""
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    auroc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    precision = tp / (tp + fp)
    ap = float(np.sum(np.diff(tpr) * precision))
    fpr95 = float(fpr[1:][_reaches_target(tp, n_pos)].min())
    return auroc, ap, fpr95


def evaluate(scores, labels) -> EvalResult:
    s, pos = _prepare(scores, labels)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos_sorted = pos[order]
    # last index of every run of equal scores
    ends = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.append(ends, s_sorted.size - 1)
    tp = np.cumsum(pos_sorted)[ends].astype(np.float64)
    fp = (ends + 1) - tp
    n_pos = int(pos.sum())
    n_neg = int(pos.size - n_pos)
    return EvalResult(*_summarize(tp, fp, n_pos, n_neg), n_pos, n_neg)


def evaluate_bruteforce(scores, labels) -> EvalResult:
    """Direct counting at every distinct threshold; slow, for testing."""
    s, pos = _prepare(scores, labels)
    pos_scores = s[pos]
    neg_scores = s[~pos]
    n_pos, n_neg = pos_scores.size, neg_scores.size
    thresholds = sorted(set(s.tolist()), reverse=True)
    tp = np.array([sum(1 for v in pos_scores if v >= t) for t in thresholds], dtype=np.float64)
    fp = np.array([sum(1 for v in neg_scores if v >= t) for t in thresholds], dtype=np.float64)
    auroc, ap, fpr95 = _summarize_loop(tp, fp, n_pos, n_neg)

    wins = (pos_scores[:, None] > neg_scores[None, :]).sum()
    ties = (pos_scores[:, None] == neg_scores[None, :]).sum()
    pairwise = (wins + 0.5 * ties) / (n_pos * n_neg)
    if abs(pairwise - auroc) > 1e-9:
        raise AssertionError(f"trapezoid AUROC {auroc} disagrees with pairwise {pairwise}")
    return EvalResult(auroc, ap, fpr95, n_pos, n_neg)


def _summarize_loop(tp, fp, n_pos, n_neg):
    auroc = ap = 0.0
    prev_tpr = prev_fpr = 0.0
    fpr95 = 1.0
    for t, f in zip(tp, fp):
        tpr, fpr = t / n_pos, f / n_neg
        auroc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0
        ap += (tpr - prev_tpr) * t / (t + f)
        if t * 100 >= TPR_TARGET_PERCENT * n_pos:
            fpr95 = min(fpr95, fpr)
        prev_tpr, prev_fpr = tpr, fpr
    return auroc, ap, fpr95
