"""Split maps into an n x n grid of sub-maps, reassemble them, and calibrate
anomaly scores across sub-map seams.

Arrays are split on their last two axes, so the same functions handle
embedding maps ``[d, H, W]`` and score maps ``[H, W]``. Sub-maps are listed
row-major by grid position ``(r, c)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, ParameterError, PartitionError

MULTIPLICATIVE = "multiplicative"
ADDITIVE = "additive"
OFF = "off"
CALIBRATION_MODES = (OFF, MULTIPLICATIVE, ADDITIVE)

RIGHT_LEFT = "right-left"
BOTTOM_TOP = "bottom-top"

_TINY_MEAN = 1e-12


def check_divisible(height: int, width: int, n: int) -> tuple[int, int]:
    if n < 1:
        raise PartitionError(f"partition factor must be >= 1, got {n}")
    if height % n or width % n:
        raise PartitionError(f"map of H={height}, W={width} is not divisible into {n}x{n} sub-maps")
    return height // n, width // n


def split_map(m: np.ndarray, n: int) -> list[np.ndarray]:
    h, w = m.shape[-2:]
    sh, sw = check_divisible(h, w, n)
    return [m[..., r * sh:(r + 1) * sh, c * sw:(c + 1) * sw].copy()
            for r in range(n) for c in range(n)]


def assemble_map(parts: list[np.ndarray], n: int) -> np.ndarray:
    if n < 1 or len(parts) != n * n:
        raise PartitionError(f"expected {n * n} sub-maps for n={n}, got {len(parts)}")
    shape = parts[0].shape
    if any(p.shape != shape for p in parts):
        raise PartitionError("sub-maps do not share one shape")
    rows = [np.concatenate(parts[r * n:(r + 1) * n], axis=-1) for r in range(n)]
    return np.concatenate(rows, axis=-2)


def edge_mean(a: np.ndarray, b: np.ndarray, side: str) -> tuple[float, float]:
    """Mean scores on the facing edges of ``a`` and ``b``.

    ``right-left``: ``b`` sits right of ``a``; ``bottom-top``: ``b`` sits below.
    """
    if side == RIGHT_LEFT:
        ea, eb = a[:, -1], b[:, 0]
    elif side == BOTTOM_TOP:
        ea, eb = a[-1, :], b[0, :]
    else:
        raise ParameterError(f"unknown side {side!r}")
    if ea.shape != eb.shape:
        raise PartitionError(f"facing edges differ in length: {ea.size} vs {eb.size}")
    return float(np.mean(ea, dtype=np.float64)), float(np.mean(eb, dtype=np.float64))


@dataclass
class CalibrationStep:
    reference: tuple[int, int]
    target: tuple[int, int]
    side: str
    ref_mean: float
    target_mean: float
    factor: float


@dataclass
class CalibrationReport:
    mode: str
    steps: list[CalibrationStep] = field(default_factory=list)

    @property
    def order(self) -> list[tuple[int, int]]:
        return [(0, 0)] + [s.target for s in self.steps]

    def to_text(self) -> str:
        label = "ratio" if self.mode == MULTIPLICATIVE else "shift"
        lines = [f"# mode={self.mode} reference=(0,0)"]
        for s in self.steps:
            lines.append(f"{s.reference}->{s.target} {s.side} I={s.ref_mean:.9g} "
                         f"J={s.target_mean:.9g} {label}={s.factor:.9g}")
        return "\n".join(lines) + "\n"


def calibrate_scores(parts: list[np.ndarray], n: int,
                     mode: str = MULTIPLICATIVE) -> tuple[list[np.ndarray], CalibrationReport]:
    """Equalize score baselines across sub-maps.

    Sub-map (0, 0) is the reference. Sweeping row-major, each later sub-map is
    matched to its left neighbour when it has one, otherwise to the one above,
    which is always calibrated by then. Multiplicative mode scales the sub-map
    by I/J; additive mode shifts it by I - J.
    """
    if mode not in (MULTIPLICATIVE, ADDITIVE):
        raise ParameterError(f"unknown calibration mode {mode!r}")
    if n < 2:
        raise ParameterError("calibration needs n >= 2")
    if len(parts) != n * n:
        raise PartitionError(f"expected {n * n} sub-maps for n={n}, got {len(parts)}")
    out = [np.asarray(p, dtype=np.float64).copy() for p in parts]
    report = CalibrationReport(mode)
    for r in range(n):
        for c in range(n):
            if r == 0 and c == 0:
                continue
            ref = (r, c - 1) if c > 0 else (r - 1, c)
            side = RIGHT_LEFT if c > 0 else BOTTOM_TOP
            idx = r * n + c
            i_mean, j_mean = edge_mean(out[ref[0] * n + ref[1]], out[idx], side)
            if mode == MULTIPLICATIVE:
                if (abs(i_mean) < _TINY_MEAN or abs(j_mean) < _TINY_MEAN
                        or np.sign(i_mean) != np.sign(j_mean)):
                    raise CalibrationError(
                        f"edge means I={i_mean:.3g}, J={j_mean:.3g} between {ref} and {(r, c)} "
                        "are near zero or differ in sign; use additive calibration")
                factor = i_mean / j_mean
                out[idx] *= factor
            else:
                factor = i_mean - j_mean
                out[idx] += factor
            report.steps.append(CalibrationStep(ref, (r, c), side, i_mean, j_mean, factor))
    return out, report
