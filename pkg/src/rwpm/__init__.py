"""Random-walk refinement of pixel embedding maps for anomaly segmentation."""

__version__ = "0.1.0"

from .diffusion import DiffusionConfig, diffuse_closed_form, diffuse_iterative, diffusion_objective
from .graph import build_affinity, softmax_transition, topk_transition
from .metrics import EvalResult, evaluate, evaluate_bruteforce
from .partition import assemble_map, calibrate_scores, edge_mean, split_map
from .pipeline import PipelineConfig, run_pipeline
from .scoring import LinearClassifier, ScoringFunction, compute_logits, score_map
from .synth import SynthConfig, generate_scene, scene_statistics

__all__ = [
    "DiffusionConfig", "diffuse_closed_form", "diffuse_iterative", "diffusion_objective",
    "build_affinity", "softmax_transition", "topk_transition",
    "EvalResult", "evaluate", "evaluate_bruteforce",
    "assemble_map", "calibrate_scores", "edge_mean", "split_map",
    "PipelineConfig", "run_pipeline",
    "LinearClassifier", "ScoringFunction", "compute_logits", "score_map",
    "SynthConfig", "generate_scene", "scene_statistics",
]
