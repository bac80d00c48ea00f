"""Seeded synthetic scenes whose inlier embeddings lie on bent class manifolds.

Each inlier class owns a vertical band of the image. A pixel of class k gets
the embedding ``normalize(cos(theta) * p_k + sin(theta) * t_k + noise)``
with ``theta ~ U[0, theta_max]``, where ``p_k`` is the class prototype and
``t_k`` a fixed tangent orthogonal to it. Far along the arc an inlier's logit
for its own class drops, which is the failure mode diffusion is meant to
repair. One disc-shaped outlier blob mixes the prototypes of the two bands
nearest its centre, so outliers keep moderate logits for two classes.

The classifier rows are ``logit_scale * p_k`` with a shared ``logit_bias``.
With unit-length rows and no bias, the off-class logits sit at zero and the
sum-over-classes scores (energy, RbA) rank a point halfway between two
prototypes as more inlier-like than the prototype itself; the defaults put
the sigmoid midpoint at cosine 0.85, so all three scores order pixels by
their best class match as a trained head would.

``theta_max`` and ``noise_sigma`` are stand-ins for "manifold distortion";
they have no calibrated meaning beyond this generator.

Random draws come from ``numpy.random.Generator(PCG64(seed))`` in this order:
a d x d standard normal matrix (QR gives prototypes and tangents), then a
K x d normal matrix only when d < 2K (fallback tangents), the blob centre
row and column (two uniforms), per-pixel theta (H*W uniforms, row-major),
and per-pixel noise (H*W x d normals).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import InputFormatError, ParameterError
from .scoring import LinearClassifier
from .tensor_io import INLIER, OUTLIER, Tensor, save_tensor

RNG_NAME = "numpy.random.PCG64"
OUTLIER_CLASS = -1


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    K: int = 4
    d: int = 16
    H: int = 64
    W: int = 64
    outlier_fraction: float = 0.1
    theta_max: float = 1.2
    noise_sigma: float = 0.02
    outlier_mix: float = 0.5
    logit_scale: float = 50.0
    logit_bias: float = -42.5

    def __post_init__(self):
        checks = [
            (self.seed >= 0, "seed must be non-negative"),
            (self.K >= 2, "K must be >= 2"),
            (self.d >= 3, "d must be >= 3"),
            (self.K <= self.d, "K must not exceed d (prototypes are orthonormal)"),
            (self.H >= 1 and self.W >= 1, "H and W must be positive"),
            (self.K <= self.W, "need at least one column per class band"),
            (0 < self.outlier_fraction < 0.5, "outlier_fraction must lie in (0, 0.5)"),
            (0 <= self.theta_max < math.pi / 2, "theta_max must lie in [0, pi/2)"),
            (self.noise_sigma >= 0, "noise_sigma must be >= 0"),
            (0 < self.outlier_mix < 1, "outlier_mix must lie in (0, 1)"),
            (self.logit_scale > 0, "logit_scale must be positive"),
            (math.isfinite(self.logit_bias), "logit_bias must be finite"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterError(msg)

    def replace(self, **changes) -> "SynthConfig":
        return SynthConfig(**{**asdict(self), **changes})

    def to_keyvalue(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())


def parse_keyvalue(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputFormatError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def config_from_mapping(values: dict[str, str]) -> SynthConfig:
    types = {f.name: f.type for f in fields(SynthConfig)}
    unknown = set(values) - set(types)
    if unknown:
        raise InputFormatError(f"unknown synth config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in values.items():
        try:
            kwargs[key] = int(value) if types[key] in ("int", int) else float(value)
        except ValueError as exc:
            raise InputFormatError(f"bad value for {key}: {value!r}") from exc
    return SynthConfig(**kwargs)


def load_config(path) -> SynthConfig:
    return config_from_mapping(parse_keyvalue(Path(path).read_text()))


@dataclass
class SynthScene:
    embeddings: np.ndarray  # float32 [d, H, W]
    labels: np.ndarray  # uint8 [H, W]
    class_map: np.ndarray  # int [H, W], OUTLIER_CLASS on the blob
    prototypes: np.ndarray  # unit class directions [K, d]
    classifier: LinearClassifier
    config: SynthConfig

    def manifest(self) -> str:
        return self.config.to_keyvalue() + f"rng={RNG_NAME}\n"


def _normalize(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _directions(rng: np.random.Generator, k: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    q = _normalize(q.T)
    protos = q[:k]
    if d >= 2 * k:
        return protos, q[k:2 * k]
    g = rng.standard_normal((k, d))
    basis = protos if d > k else None
    tangents = np.empty_like(g)
    for i in range(k):
        span = basis if basis is not None else protos[i:i + 1]
        v = g[i] - span.T @ (span @ g[i])
        tangents[i] = v / np.linalg.norm(v)
    return protos, tangents


def band_map(height: int, width: int, k: int) -> np.ndarray:
    cols = np.arange(width) * k // width
    return np.broadcast_to(cols, (height, width)).astype(np.int64)


def generate_scene(cfg: SynthConfig) -> SynthScene:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    k, d, h, w = cfg.K, cfg.d, cfg.H, cfg.W
    protos, tangents = _directions(rng, k, d)

    radius = math.sqrt(cfg.outlier_fraction * h * w / math.pi)
    lo_r, hi_r = min(radius, (h - 1) / 2), max(h - 1 - radius, (h - 1) / 2)
    lo_c, hi_c = min(radius, (w - 1) / 2), max(w - 1 - radius, (w - 1) / 2)
    centre_r = rng.uniform(lo_r, hi_r)
    centre_c = rng.uniform(lo_c, hi_c)
    rows, cols = np.mgrid[0:h, 0:w]
    blob = (rows - centre_r) ** 2 + (cols - centre_c) ** 2 <= radius ** 2
    if not blob.any() or blob.all():
        raise ParameterError("outlier blob is empty or covers the whole map; adjust outlier_fraction")

    band_centres = (np.arange(k) + 0.5) * w / k
    nearest = np.argsort(np.abs(band_centres - centre_c), kind="stable")[:2]

    theta = rng.uniform(0.0, cfg.theta_max, size=h * w)
    noise = rng.standard_normal((h * w, d)) * cfg.noise_sigma

    classes = band_map(h, w, k).copy()
    classes[blob] = OUTLIER_CLASS
    flat = classes.ravel()
    emb = np.empty((h * w, d))
    inl = flat != OUTLIER_CLASS
    c = flat[inl]
    t = theta[inl][:, None]
    emb[inl] = np.cos(t) * protos[c] + np.sin(t) * tangents[c] + noise[inl]
    mix = cfg.outlier_mix * protos[nearest[0]] + (1 - cfg.outlier_mix) * protos[nearest[1]]
    emb[~inl] = mix + noise[~inl]
    emb = _normalize(emb)

    labels = np.where(blob, OUTLIER, INLIER).astype(np.uint8)
    embeddings = emb.T.reshape(d, h, w).astype(np.float32)
    weights = (cfg.logit_scale * protos).astype(np.float32)
    bias = np.full(k, cfg.logit_bias, dtype=np.float32)
    clf = LinearClassifier(weights, bias)
    return SynthScene(embeddings, labels, classes, protos.astype(np.float32), clf, cfg)


def write_scene(scene: SynthScene, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "embeddings": out / "embeddings.rwt",
        "labels": out / "labels.rwt",
        "classifier": out / "classifier.rwt",
        "bias": out / "bias.rwt",
        "manifest": out / "manifest.txt",
    }
    save_tensor(paths["embeddings"], Tensor.real(scene.embeddings))
    save_tensor(paths["labels"], Tensor.labels(scene.labels))
    save_tensor(paths["classifier"], Tensor.real(scene.classifier.weights))
    save_tensor(paths["bias"], Tensor.real(scene.classifier.bias))
    paths["manifest"].write_text(scene.manifest())
    return paths


def intra_class_cosine(pixels: np.ndarray, class_map: np.ndarray) -> dict[int, float]:
    """Mean pairwise cosine (i != j) among pixels of each class."""
    x = _normalize(np.asarray(pixels, dtype=np.float64))
    flat = np.asarray(class_map).ravel()
    out = {}
    for cls in np.unique(flat):
        members = x[flat == cls]
        n = members.shape[0]
        if n < 2:
            continue
        total = members.sum(axis=0)
        out[int(cls)] = float((total @ total - n) / (n * (n - 1)))
    return out


def scene_statistics(scene: SynthScene) -> dict:
    d = scene.embeddings.shape[0]
    pixels = scene.embeddings.reshape(d, -1).T.astype(np.float64)
    flat = scene.class_map.ravel()
    counts = {int(c): int((flat == c).sum()) for c in np.unique(flat)}
    inlier_classes = [c for c in counts if c != OUTLIER_CLASS]
    cosines = pixels @ scene.prototypes.T.astype(np.float64)
    logits = pixels @ scene.classifier.weights.T + scene.classifier.bias
    return {
        "counts": counts,
        "intra_class_cosine": intra_class_cosine(pixels, flat),
        "prototype_cosine": {c: float(cosines[flat == c, c].mean()) for c in inlier_classes},
        "prototype_logit": {c: float(logits[flat == c, c].mean()) for c in inlier_classes},
    }
