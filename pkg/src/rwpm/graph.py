"""Pixel manifold graph: cosine affinity and row-stochastic transition matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SizeError
from .tensor_io import l2_normalize_rows

DEFAULT_TAU = 0.01


@dataclass(frozen=True)
class TransitionGraph:
    """Row-stochastic, zero-diagonal transition matrix over N pixels.

    ``mode`` is ``"softmax"`` or ``"topk"``; ``k`` is set only for topk.
    """

    matrix: np.ndarray
    mode: str
    tau: float
    k: int | None = None

    @property
    def n_pixels(self) -> int:
        return self.matrix.shape[0]


def build_affinity(x: np.ndarray, already_normalized: bool = False) -> np.ndarray:
    """Cosine affinity between pixel rows with the self-loops zeroed."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise SizeError(f"affinity needs at least 2 pixels, got shape {x.shape}")
    xn = x if already_normalized else l2_normalize_rows(x)
    w = xn @ xn.T
    # BLAS may round the two triangles differently
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 0.0)
    return w


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise ParameterError(f"temperature must be positive, got {tau}")


def _masked_softmax(logits: np.ndarray, tau: float) -> np.ndarray:
    # logits carry -inf on every excluded entry; each row keeps at least one
    peak = logits.max(axis=1, keepdims=True)
    e = np.exp((logits - peak) / tau)
    return e / e.sum(axis=1, keepdims=True)


def softmax_transition(w: np.ndarray, tau: float = DEFAULT_TAU) -> TransitionGraph:
    _check_tau(tau)
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    if w.ndim != 2 or w.shape[1] != n or n < 2:
        raise SizeError(f"affinity must be square with N >= 2, got {w.shape}")
    logits = w.copy()
    np.fill_diagonal(logits, -np.inf)
    return TransitionGraph(_masked_softmax(logits, tau), "softmax", tau)


def topk_transition(w: np.ndarray, k: int, tau: float = DEFAULT_TAU) -> TransitionGraph:
    """Keep each row's k strongest off-diagonal affinities, softmax over those.

    Ties go to the lower column index.
    """
    _check_tau(tau)
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    if w.ndim != 2 or w.shape[1] != n or n < 2:
        raise SizeError(f"affinity must be square with N >= 2, got {w.shape}")
    keep = min(k, n - 1)
    ranked = w.copy()
    np.fill_diagonal(ranked, -np.inf)
    order = np.argsort(-ranked, axis=1, kind="stable")[:, :keep]
    logits = np.full_like(w, -np.inf)
    rows = np.arange(n)[:, None]
    logits[rows, order] = w[rows, order]
    return TransitionGraph(_masked_softmax(logits, tau), "topk", tau, k)
