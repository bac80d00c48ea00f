"""Logits from a linear prototype classifier and per-pixel anomaly scores.

Higher score means more anomalous for every scoring function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp, softmax

from .errors import ParameterError, SizeError
from .tensor_io import check_embedding_map, to_pixel_matrix

ENERGY = "energy"
RBA = "rba"
ONE_MINUS_MAX = "one_minus_max"
SCORE_KINDS = (ENERGY, RBA, ONE_MINUS_MAX)

SIGMOID = "sigmoid"
SOFTMAX = "softmax"


@dataclass(frozen=True)
class LinearClassifier:
    weights: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 1:
            raise SizeError(f"classifier weights must be [K, d] with K >= 1, got {w.shape}")
        b = np.zeros(w.shape[0]) if self.bias is None else np.asarray(self.bias, dtype=np.float64)
        if b.shape != (w.shape[0],):
            raise SizeError(f"bias shape {b.shape} does not match K={w.shape[0]}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class ScoringFunction:
    kind: str = ENERGY
    activation: str = SIGMOID

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise ParameterError(f"unknown scoring function {self.kind!r}; choose from {SCORE_KINDS}")
        if self.activation not in (SIGMOID, SOFTMAX):
            raise ParameterError(f"unknown activation {self.activation!r}")


def compute_logits(m: np.ndarray, clf: LinearClassifier) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != clf.dim:
        raise SizeError(f"embeddings of shape {m.shape} do not match classifier dim {clf.dim}")
    return m @ clf.weights.T + clf.bias


# The row scorers accept a single logit row [K] or a batch [N, K].

def energy_score(logits) -> np.ndarray | float:
    return -logsumexp(np.asarray(logits, dtype=np.float64), axis=-1)


def rba_score(logits) -> np.ndarray | float:
    return -expit(np.asarray(logits, dtype=np.float64)).sum(axis=-1)


def one_minus_max_score(logits, activation: str = SIGMOID) -> np.ndarray | float:
    logits = np.asarray(logits, dtype=np.float64)
    if activation == SIGMOID:
        probs = expit(logits)
    elif activation == SOFTMAX:
        probs = softmax(logits, axis=-1)
    else:
        raise ParameterError(f"unknown activation {activation!r}")
    return 1.0 - probs.max(axis=-1)


def score_logits(logits: np.ndarray, fn: ScoringFunction) -> np.ndarray:
    if fn.kind == ENERGY:
        return energy_score(logits)
    if fn.kind == RBA:
        return rba_score(logits)
    return one_minus_max_score(logits, fn.activation)


def score_pixels(m: np.ndarray, clf: LinearClassifier, fn: ScoringFunction) -> np.ndarray:
    """Scores for a pixel matrix [N, d] -> [N]."""
    return score_logits(compute_logits(m, clf), fn)


def score_map(values: np.ndarray, clf: LinearClassifier, fn: ScoringFunction,
              shape: tuple[int, int] | None = None) -> np.ndarray:
    """Anomaly score map [H, W].

    ``values`` is an embedding map [d, H, W], or a pixel matrix [H*W, d]
    together with ``shape=(H, W)``.
    """
    values = np.asarray(values)
    if values.ndim == 3:
        _, h, w = check_embedding_map(values).shape
        pixels = to_pixel_matrix(values)
    else:
        if shape is None:
            raise SizeError("a pixel matrix needs an explicit (H, W) shape")
        h, w = shape
        if values.ndim != 2 or values.shape[0] != h * w:
            raise SizeError(f"pixel matrix {values.shape} does not fit a {h}x{w} map")
        pixels = values
    return score_pixels(pixels, clf, fn).reshape(h, w)
