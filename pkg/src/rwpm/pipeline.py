"""End-to-end refinement and scoring of an embedding map.

split -> per sub-map (normalize, affinity, transition, diffuse) -> score each
sub-map -> optional calibration -> assemble.

Refined embeddings are rounded to float32 before scoring, the precision at
which they would be handed to a downstream head or written to disk. This
keeps ``process`` identical to ``refine`` followed by ``score``.
"""

from __future__ import annotations

import time
import warnings
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from .diffusion import DEFAULT_ALPHA, DEFAULT_ITERS, DiffusionConfig, diffuse, renormalize
from .errors import ParameterError
from .graph import DEFAULT_TAU, build_affinity, softmax_transition, topk_transition
from .partition import (
    CALIBRATION_MODES,
    MULTIPLICATIVE,
    OFF,
    CalibrationReport,
    assemble_map,
    calibrate_scores,
    check_divisible,
    split_map,
)
from .scoring import ENERGY, SIGMOID, LinearClassifier, ScoringFunction, score_map
from .tensor_io import check_embedding_map, from_pixel_matrix, l2_normalize_rows, to_pixel_matrix

DEFAULT_PARTITION = 2


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = DEFAULT_ALPHA
    tau: float = DEFAULT_TAU
    iters: int = DEFAULT_ITERS
    partition: int = DEFAULT_PARTITION
    knn: int | None = None
    closed_form: bool = False
    score_fn: str = ENERGY
    activation: str = SIGMOID
    calibrate: str | None = None  # None picks off for n <= 2, multiplicative above
    renormalize: bool = False
    tol: float | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError(f"temperature must be positive, got {self.tau}")
        if self.knn is not None and self.knn < 1:
            raise ParameterError(f"k must be >= 1, got {self.knn}")
        if self.partition < 1:
            raise ParameterError(f"partition factor must be >= 1, got {self.partition}")
        if self.calibrate is not None and self.calibrate not in CALIBRATION_MODES:
            raise ParameterError(f"calibration must be one of {CALIBRATION_MODES}")
        self.diffusion
        self.scoring

    @property
    def diffusion(self) -> DiffusionConfig:
        return DiffusionConfig(self.alpha, self.iters, self.closed_form, self.tol)

    @property
    def scoring(self) -> ScoringFunction:
        return ScoringFunction(self.score_fn, self.activation)

    @property
    def calibration(self) -> str:
        if self.calibrate is not None:
            return self.calibrate
        return MULTIPLICATIVE if self.partition > 2 else OFF

    def as_dict(self) -> dict:
        out = asdict(self)
        out["calibrate"] = self.calibration
        out["graph"] = "softmax" if self.knn is None else "topk"
        out["solver"] = "closed_form" if self.closed_form else "iterative"
        return out


@dataclass
class PipelineResult:
    scores: np.ndarray
    refined: np.ndarray
    timings: dict[str, float] = field(default_factory=dict)
    peak_matrix_elems: int = 0
    calibration: CalibrationReport | None = None


class _Stopwatch:
    def __init__(self):
        self.totals: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] = self.totals.get(name, 0.0) + time.perf_counter() - start


def refine_pixels(pixels: np.ndarray, cfg: PipelineConfig, watch: _Stopwatch | None = None) -> np.ndarray:
    """Diffuse one pixel matrix [N, d] over its own graph."""
    watch = watch or _Stopwatch()
    m0 = np.asarray(pixels, dtype=np.float64)
    with watch.stage("normalize"):
        xn = l2_normalize_rows(m0)
    with watch.stage("affinity"):
        w = build_affinity(xn, already_normalized=True)
    with watch.stage("transition"):
        s = softmax_transition(w, cfg.tau) if cfg.knn is None else topk_transition(w, cfg.knn, cfg.tau)
    with watch.stage("diffuse"):
        refined = diffuse(s, m0, cfg.diffusion).refined
        if cfg.renormalize:
            refined = renormalize(refined)
    return refined


def _refine_parts(values: np.ndarray, cfg: PipelineConfig, watch: _Stopwatch):
    values = check_embedding_map(values)
    with watch.stage("split"):
        parts = split_map(values, cfg.partition)
    refined = []
    for part in parts:
        _, sh, sw = part.shape
        out = refine_pixels(to_pixel_matrix(part), cfg, watch)
        refined.append(from_pixel_matrix(out.astype(np.float32), sh, sw))
    return refined


def refine_map(values: np.ndarray, cfg: PipelineConfig) -> PipelineResult:
    """Refined embedding map [d, H, W] (float32), without scoring."""
    watch = _Stopwatch()
    _, h, w = check_embedding_map(values).shape
    sh, sw = check_divisible(h, w, cfg.partition)
    parts = _refine_parts(values, cfg, watch)
    with watch.stage("assemble"):
        refined = assemble_map(parts, cfg.partition)
    return PipelineResult(np.empty((0, 0)), refined, watch.totals, (sh * sw) ** 2)


def run_pipeline(values: np.ndarray, clf: LinearClassifier, cfg: PipelineConfig) -> PipelineResult:
    watch = _Stopwatch()
    _, h, w = check_embedding_map(values).shape
    sh, sw = check_divisible(h, w, cfg.partition)
    mode = cfg.calibration
    if cfg.partition > 2 and mode == OFF:
        warnings.warn(f"partition n={cfg.partition} without calibration; sub-map score "
                      "baselines may disagree", stacklevel=2)
    parts = _refine_parts(values, cfg, watch)
    with watch.stage("score"):
        score_parts = [score_map(p, clf, cfg.scoring) for p in parts]
    report = None
    if mode != OFF and cfg.partition >= 2:
        with watch.stage("calibrate"):
            score_parts, report = calibrate_scores(score_parts, cfg.partition, mode)
    with watch.stage("assemble"):
        scores = assemble_map(score_parts, cfg.partition)
        refined = assemble_map(parts, cfg.partition)
    return PipelineResult(scores, refined, watch.totals, (sh * sw) ** 2, report)


def raw_scores(values: np.ndarray, clf: LinearClassifier, fn: ScoringFunction) -> np.ndarray:
    return score_map(np.asarray(values, dtype=np.float32), clf, fn)
