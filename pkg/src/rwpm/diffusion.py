"""Random walk with restart over a transition graph.

The iterative form runs ``m <- alpha * S @ m + (1 - alpha) * m0`` for a
fixed number of steps; the closed form solves
``(I - alpha * S) m = (1 - alpha) * m0`` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError, ParameterError, SizeError
from .graph import TransitionGraph
from .tensor_io import l2_normalize_rows

DEFAULT_ALPHA = 0.99
DEFAULT_ITERS = 20
SHORT_ITERS = 5


@dataclass(frozen=True)
class DiffusionConfig:
    alpha: float = DEFAULT_ALPHA
    iters: int = DEFAULT_ITERS
    closed_form: bool = False
    tol: float | None = None

    def __post_init__(self):
        if self.closed_form:
            if not 0 < self.alpha < 1:
                raise ParameterError(f"closed form needs 0 < alpha < 1, got {self.alpha}")
        elif not 0 <= self.alpha < 1:
            raise ParameterError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.iters < 0:
            raise ParameterError(f"iteration count must be >= 0, got {self.iters}")


@dataclass
class DiffusionResult:
    refined: np.ndarray
    residual_history: list[float] = field(default_factory=list)


def _matrix(s) -> np.ndarray:
    return s.matrix if isinstance(s, TransitionGraph) else np.asarray(s, dtype=np.float64)


def _check_dims(s: np.ndarray, m0: np.ndarray) -> None:
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise SizeError(f"transition matrix must be square, got {s.shape}")
    if m0.ndim != 2 or m0.shape[0] != s.shape[0]:
        raise SizeError(f"embeddings {m0.shape} do not match a graph over {s.shape[0]} pixels")


def _max_row_norm(x: np.ndarray) -> float:
    return float(np.sqrt((x * x).sum(axis=1).max()))


def diffuse_iterative(s, m0, alpha: float = DEFAULT_ALPHA, iters: int = DEFAULT_ITERS,
                      tol: float | None = None) -> DiffusionResult:
    """Run ``iters`` random-walk steps from ``m0``.

    ``residual_history[t]`` is the largest row norm of ``m^{t+1} - m^t``.
    With ``tol`` set, stops early once that residual drops below it.
    """
    DiffusionConfig(alpha, iters)
    s = _matrix(s)
    m0 = np.asarray(m0, dtype=np.float64)
    _check_dims(s, m0)
    restart = (1.0 - alpha) * m0
    m = m0.copy()
    history = []
    for _ in range(iters):
        nxt = alpha * (s @ m) + restart
        if not np.isfinite(nxt).all():
            raise NumericalError("non-finite value during diffusion")
        history.append(_max_row_norm(nxt - m))
        m = nxt
        if tol is not None and history[-1] < tol:
            break
    return DiffusionResult(m, history)


def diffuse_closed_form(s, m0, alpha: float = DEFAULT_ALPHA) -> DiffusionResult:
    """Limit of the walk via one LU factorization of ``I - alpha * S``."""
    DiffusionConfig(alpha, 0, closed_form=True)
    s = _matrix(s)
    m0 = np.asarray(m0, dtype=np.float64)
    _check_dims(s, m0)
    n = s.shape[0]
    a = s * -alpha
    a.flat[:: n + 1] += 1.0
    try:
        lu = scipy.linalg.lu_factor(a, overwrite_a=True, check_finite=False)
        refined = scipy.linalg.lu_solve(lu, m0, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"closed-form solve failed: {exc}") from exc
    refined *= 1.0 - alpha
    if not np.isfinite(refined).all():
        raise NumericalError("closed-form solve produced non-finite values")
    return DiffusionResult(refined)


def diffuse(s, m0, cfg: DiffusionConfig) -> DiffusionResult:
    if cfg.closed_form:
        return diffuse_closed_form(s, m0, cfg.alpha)
    return diffuse_iterative(s, m0, cfg.alpha, cfg.iters, cfg.tol)


def renormalize(m: np.ndarray) -> np.ndarray:
    return l2_normalize_rows(m)


def symmetrize(s) -> np.ndarray:
    s = _matrix(s)
    return 0.5 * (s + s.T)


def diffusion_objective(s, m, m0, alpha: float) -> float:
    """Graph smoothness plus weighted fidelity to ``m0``.

    ``0.5 * sum_ij S_ij |m_i - m_j|^2 + (1 - alpha) / alpha * sum_i |m_i - m0_i|^2``
    """
    s = _matrix(s)
    m = np.asarray(m, dtype=np.float64)
    m0 = np.asarray(m0, dtype=np.float64)
    _check_dims(s, m)
    if m0.shape != m.shape:
        raise SizeError(f"m {m.shape} and m0 {m0.shape} differ")
    sq = (m * m).sum(axis=1)
    # sum_ij S_ij (|m_i|^2 + |m_j|^2 - 2 <m_i, m_j>)
    smooth = s.sum(axis=1) @ sq + s.sum(axis=0) @ sq - 2.0 * np.sum(s * (m @ m.T))
    fidelity = np.sum((m - m0) ** 2)
    return float(0.5 * smooth + (1.0 - alpha) / alpha * fidelity)
