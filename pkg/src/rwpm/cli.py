"""Command-line front end.

Exit codes: 0 success, 2 bad input or parameter, 3 dimension/partition or
empty-class error, 4 numerical failure, 1 failed ``bench --assert-trend``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .bench import CLOSED_FORM, ITERATIVE, run_bench, trend_summary, write_csv
from .errors import InputFormatError, RWPMError, SizeError
from .metrics import evaluate, evaluate_bruteforce
from .partition import CALIBRATION_MODES
from .pipeline import PipelineConfig, raw_scores, refine_map, run_pipeline
from .scoring import SCORE_KINDS, SIGMOID, SOFTMAX, LinearClassifier, ScoringFunction
from .synth import SynthConfig, config_from_mapping, generate_scene, parse_keyvalue, write_scene
from .tensor_io import (
    LABEL8,
    REAL32,
    Tensor,
    check_embedding_map,
    check_label_map,
    check_score_map,
    load_tensor,
    save_tensor,
)


def _load(path, dtype: str, what: str) -> np.ndarray:
    try:
        t = load_tensor(path)
    except OSError as exc:
        raise InputFormatError(f"cannot read {what} {path}: {exc.strerror or exc}") from exc
    if t.dtype != dtype:
        raise InputFormatError(f"{what} {path} has dtype {t.dtype}, expected {dtype}")
    return t.data


def load_embeddings(path) -> np.ndarray:
    return check_embedding_map(_load(path, REAL32, "embedding map"))


def load_classifier(weights_path, bias_path=None) -> LinearClassifier:
    weights = _load(weights_path, REAL32, "classifier weights")
    if weights.ndim != 2:
        raise SizeError(f"classifier weights must be [K, d], got {weights.shape}")
    bias = None if bias_path is None else _load(bias_path, REAL32, "classifier bias")
    return LinearClassifier(weights, bias)


def load_labels(path) -> np.ndarray:
    return check_label_map(_load(path, LABEL8, "label map"))


def load_scores(path) -> np.ndarray:
    return check_score_map(_load(path, REAL32, "score map"))


def _save_real(path, array) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    save_tensor(path, Tensor.real(np.asarray(array, dtype=np.float32)))


def _pipeline_config(args, scoring: bool = True) -> PipelineConfig:
    extra = {}
    if scoring:
        extra = dict(score_fn=args.score_fn, activation=args.activation, calibrate=args.calibrate)
    return PipelineConfig(
        alpha=args.alpha, tau=args.tau, iters=args.iters, partition=args.partition,
        knn=args.knn, closed_form=args.closed_form, renormalize=args.renormalize,
        tol=args.tol, **extra,
    )


def _write_manifest(path, payload: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _report_eval(result, out_path=None) -> None:
    print(result.line())
    if out_path:
        Path(out_path).write_text(result.to_keyvalue())


# --- commands -------------------------------------------------------------

def cmd_process(args) -> int:
    cfg = _pipeline_config(args)
    start = time.perf_counter()
    values = load_embeddings(args.embeddings)
    clf = load_classifier(args.classifier, args.bias)
    labels = load_labels(args.labels) if args.labels else None
    load_s = time.perf_counter() - start
    result = run_pipeline(values, clf, cfg)
    _save_real(args.out, result.scores)
    timings = {"load": load_s, **result.timings}
    manifest = {
        "command": "process",
        "version": __version__,
        "inputs": {"embeddings": str(args.embeddings), "classifier": str(args.classifier),
                   "bias": args.bias and str(args.bias), "labels": args.labels and str(args.labels)},
        "outputs": {"scores": str(args.out), "refined": args.dump_refined and str(args.dump_refined)},
        "params": cfg.as_dict(),
        "threads": args.threads,
        "shape": {"d": values.shape[0], "H": values.shape[1], "W": values.shape[2]},
        "n_submaps": cfg.partition ** 2,
        "peak_matrix_elems": result.peak_matrix_elems,
        "wall_clock_s": timings,
    }
    if result.calibration is not None:
        manifest["calibration"] = result.calibration.to_text().splitlines()
    if args.dump_refined:
        _save_real(args.dump_refined, result.refined)
    if labels is not None:
        ev = evaluate(result.scores, labels)
        manifest["eval"] = ev.__dict__
        _report_eval(ev, args.eval_out)
    if args.figure:
        from .plotting import plot_score_maps
        baseline = raw_scores(values, clf, cfg.scoring)
        plot_score_maps(result.scores, args.figure, labels, baseline,
                        title=f"{cfg.score_fn}, alpha={cfg.alpha}, T={cfg.iters}, n={cfg.partition}")
        manifest["outputs"]["figure"] = str(args.figure)
    _write_manifest(args.manifest or f"{args.out}.manifest.json", manifest)
    return 0


def cmd_refine(args) -> int:
    cfg = _pipeline_config(args, scoring=False)
    values = load_embeddings(args.embeddings)
    result = refine_map(values, cfg)
    _save_real(args.out, result.refined)
    params = cfg.as_dict()
    for key in ("score_fn", "activation", "calibrate"):
        params.pop(key)
    _write_manifest(args.manifest or f"{args.out}.manifest.json", {
        "command": "refine",
        "version": __version__,
        "inputs": {"embeddings": str(args.embeddings)},
        "outputs": {"refined": str(args.out)},
        "params": params,
        "threads": args.threads,
        "peak_matrix_elems": result.peak_matrix_elems,
        "wall_clock_s": result.timings,
    })
    return 0


def _score_kinds(raw: list[str]) -> list[str]:
    kinds = []
    for item in raw:
        for kind in item.split(","):
            kinds.extend(SCORE_KINDS if kind == "all" else [kind])
    return list(dict.fromkeys(kinds))


def cmd_score(args) -> int:
    kinds = _score_kinds(args.score_fn or ["energy"])
    if len(kinds) > 1 and "{kind}" not in args.out:
        raise InputFormatError("several scoring functions need an --out path containing {kind}")
    values = load_embeddings(args.embeddings)
    clf = load_classifier(args.classifier, args.bias)
    for kind in kinds:
        scores = raw_scores(values, clf, ScoringFunction(kind, args.activation))
        path = args.out.replace("{kind}", kind)
        _save_real(path, scores)
        print(f"{kind} -> {path}")
    return 0


def cmd_eval(args) -> int:
    scores = load_scores(args.scores)
    labels = load_labels(args.labels)
    result = evaluate_bruteforce(scores, labels) if args.bruteforce else evaluate(scores, labels)
    _report_eval(result, args.out)
    return 0


def cmd_synth(args) -> int:
    values = parse_keyvalue(Path(args.config).read_text()) if args.config else {}
    for item in args.set or []:
        values.update(parse_keyvalue(item))
    cfg = config_from_mapping(values) if values else SynthConfig()
    scene = generate_scene(cfg)
    paths = write_scene(scene, args.out_dir)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = run_bench(sizes, d=args.dim, iters=args.iters, n=args.partition, alpha=args.alpha,
                     tau=args.tau, seed=args.seed, min_time=args.min_time)
    if args.out and args.out != "-":
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    summary = trend_summary(rows) if len(sizes) > 1 else None
    if summary:
        print(f"# slope iterative={summary['iterative_slope']:.3f} "
              f"closed_form={summary['closed_form_slope']:.3f} "
              f"iterative_faster_at_N={summary['largest_N']}:{summary['iterative_faster']}",
              file=sys.stderr)
    if args.plot:
        from .plotting import plot_scaling
        slopes = {ITERATIVE: summary["iterative_slope"],
                  CLOSED_FORM: summary["closed_form_slope"]} if summary else None
        plot_scaling(rows, args.plot, slopes)
    if args.assert_trend:
        largest = max(sizes)
        by_mode = {r.mode: r.wall_ms for r in rows if r.N == largest}
        if not by_mode[ITERATIVE] < by_mode[CLOSED_FORM]:
            print(f"error: iterative ({by_mode[ITERATIVE]:.1f} ms) not faster than closed form "
                  f"({by_mode[CLOSED_FORM]:.1f} ms) at N={largest}", file=sys.stderr)
            return 1
    return 0


# --- parser ---------------------------------------------------------------

def _diffusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.99, help="random-walk continue probability")
    p.add_argument("--tau", type=float, default=0.01, help="softmax temperature")
    p.add_argument("--iters", type=int, default=20, help="iteration count T")
    p.add_argument("--partition", type=int, default=2, help="sub-maps per axis n")
    p.add_argument("--knn", type=int, default=None, help="keep only k strongest edges per pixel")
    p.add_argument("--closed-form", action="store_true", help="solve for the walk's limit")
    p.add_argument("--renormalize", action="store_true", help="unit-normalize refined embeddings")
    p.add_argument("--tol", type=float, default=None, help="stop iterating below this residual")


def _scoring_flags(p: argparse.ArgumentParser, multiple: bool = False) -> None:
    if multiple:
        p.add_argument("--score-fn", action="append",
                       help=f"one of {', '.join(SCORE_KINDS)} or 'all'; repeatable")
    else:
        p.add_argument("--score-fn", choices=SCORE_KINDS, default="energy")
    p.add_argument("--activation", choices=(SIGMOID, SOFTMAX), default=SIGMOID,
                   help="activation inside one_minus_max")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwpm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None, help="cap on BLAS worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("process", help="refine, score, calibrate and optionally evaluate")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--bias")
    p.add_argument("--labels")
    p.add_argument("--out", required=True, help="score map output")
    p.add_argument("--manifest", help="run manifest (default <out>.manifest.json)")
    p.add_argument("--dump-refined", help="also write the refined embedding map")
    p.add_argument("--eval-out", help="write metrics as key=value lines")
    p.add_argument("--figure", help="render score maps to this image file")
    _diffusion_flags(p)
    _scoring_flags(p)
    p.add_argument("--calibrate", choices=CALIBRATION_MODES, default=None,
                   help="default: off for n <= 2, multiplicative above")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("refine", help="diffusion only; writes the refined embedding map")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    _diffusion_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("score", help="anomaly scores from an embedding map")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--bias")
    p.add_argument("--out", required=True, help="output path; use {kind} with several functions")
    _scoring_flags(p, multiple=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="AUROC, AP and FPR95 of a score map")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--bruteforce", action="store_true", help="use the counting oracle")
    p.add_argument("--out", help="write metrics as key=value lines")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic scene")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time iterative against closed-form diffusion")
    p.add_argument("--sizes", default="256,1024,4096", help="comma-separated sub-map pixel counts")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--partition", type=int, default=1, help="recorded in the n column")
    p.add_argument("--alpha", type=float, default=0.99)
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-time", type=float, default=0.2, help="seconds spent per measurement")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--plot", help="render a log-log scaling figure")
    p.add_argument("--assert-trend", action="store_true",
                   help="exit 1 unless iterative beats closed form at the largest N")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    limits = threadpool_limits(limits=args.threads) if args.threads else nullcontext()
    try:
        with limits:
            return args.func(args)
    except RWPMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InputFormatError.exit_code


if __name__ == "__main__":
    sys.exit(main())
