import csv
import json

import numpy as np
import pytest

from rwpm.cli import main
from rwpm.synth import parse_keyvalue
from rwpm.tensor_io import LABEL8, Tensor, load_tensor, save_tensor


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    assert main(["synth", "--out-dir", str(out), "--set", "H=16", "--set", "W=16", "--set", "seed=5"]) == 0
    return out


def process_args(scene, out, *extra):
    return ["process", "--embeddings", str(scene / "embeddings.rwt"),
            "--classifier", str(scene / "classifier.rwt"), "--bias", str(scene / "bias.rwt"),
            "--out", str(out), *extra]


class TestProcess:
    def test_writes_scores_and_manifest(self, scene_dir, tmp_path, capsys):
        out = tmp_path / "scores.rwt"
        code = main(process_args(scene_dir, out, "--labels", str(scene_dir / "labels.rwt")))
        assert code == 0
        assert load_tensor(out).data.shape == (16, 16)
        line = capsys.readouterr().out.strip()
        assert line.startswith("auroc=") and "n_pos=" in line
        manifest = json.loads((tmp_path / "scores.rwt.manifest.json").read_text())
        for key in ("params", "wall_clock_s", "peak_matrix_elems", "n_submaps", "eval", "threads"):
            assert key in manifest
        assert manifest["params"]["alpha"] == 0.99
        assert manifest["params"]["solver"] == "iterative"
        assert manifest["peak_matrix_elems"] == 64 ** 2

    def test_figure(self, scene_dir, tmp_path):
        fig = tmp_path / "maps.png"
        assert main(process_args(scene_dir, tmp_path / "s.rwt", "--labels", str(scene_dir / "labels.rwt"),
                                 "--figure", str(fig))) == 0
        assert fig.stat().st_size > 1000

    def test_indivisible_partition(self, scene_dir, tmp_path):
        assert main(process_args(scene_dir, tmp_path / "s.rwt", "--partition", "3")) == 3

    def test_missing_classifier(self, scene_dir, tmp_path):
        args = process_args(scene_dir, tmp_path / "s.rwt")
        args[args.index("--classifier") + 1] = str(tmp_path / "nope.rwt")
        assert main(args) == 2

    def test_bad_parameter(self, scene_dir, tmp_path):
        assert main(process_args(scene_dir, tmp_path / "s.rwt", "--tau", "0")) == 2

    def test_empty_positive_set(self, scene_dir, tmp_path):
        labels = tmp_path / "zeros.rwt"
        save_tensor(labels, Tensor(LABEL8, np.zeros((16, 16), np.uint8)))
        assert main(process_args(scene_dir, tmp_path / "s.rwt", "--labels", str(labels))) == 3

    def test_sign_mixed_calibration(self, scene_dir, tmp_path):
        code = main(process_args(scene_dir, tmp_path / "s.rwt", "--partition", "4",
                                 "--calibrate", "multiplicative"))
        assert code in (0, 4)

    def test_dump_refined_matches_refine(self, scene_dir, tmp_path):
        a, b = tmp_path / "a.rwt", tmp_path / "b.rwt"
        assert main(process_args(scene_dir, tmp_path / "s.rwt", "--dump-refined", str(a))) == 0
        assert main(["refine", "--embeddings", str(scene_dir / "embeddings.rwt"), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestScoreEval:
    def test_three_scoring_files(self, scene_dir, tmp_path):
        out = str(tmp_path / "{kind}.rwt")
        assert main(["score", "--embeddings", str(scene_dir / "embeddings.rwt"),
                     "--classifier", str(scene_dir / "classifier.rwt"), "--bias", str(scene_dir / "bias.rwt"),
                     "--score-fn", "all", "--out", out]) == 0
        for kind in ("energy", "rba", "one_minus_max"):
            assert (tmp_path / f"{kind}.rwt").exists()

    def test_multiple_kinds_need_placeholder(self, scene_dir, tmp_path):
        assert main(["score", "--embeddings", str(scene_dir / "embeddings.rwt"),
                     "--classifier", str(scene_dir / "classifier.rwt"),
                     "--score-fn", "energy,rba", "--out", str(tmp_path / "x.rwt")]) == 2

    def test_eval_matches_bruteforce(self, scene_dir, tmp_path, capsys):
        scores = tmp_path / "e.rwt"
        main(["score", "--embeddings", str(scene_dir / "embeddings.rwt"),
              "--classifier", str(scene_dir / "classifier.rwt"), "--out", str(scores)])
        capsys.readouterr()
        base = ["eval", "--scores", str(scores), "--labels", str(scene_dir / "labels.rwt")]
        assert main(base) == 0
        fast = capsys.readouterr().out
        assert main(base + ["--bruteforce", "--out", str(tmp_path / "m.txt")]) == 0
        assert capsys.readouterr().out == fast
        assert set(parse_keyvalue((tmp_path / "m.txt").read_text())) >= {"auroc", "ap", "fpr95"}


class TestSynth:
    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            assert main(["synth", "--out-dir", str(tmp_path / name), "--set", "H=8", "--set", "W=8"]) == 0
        for f in ("embeddings.rwt", "labels.rwt", "classifier.rwt", "bias.rwt", "manifest.txt"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_config_file_and_manifest(self, tmp_path):
        cfg = tmp_path / "scene.cfg"
        cfg.write_text("seed=11\nK=3\nH=12\nW=12\n")
        assert main(["synth", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
        manifest = parse_keyvalue((tmp_path / "o" / "manifest.txt").read_text())
        assert manifest["seed"] == "11" and manifest["K"] == "3"

    def test_bad_fraction(self, tmp_path):
        assert main(["synth", "--out-dir", str(tmp_path), "--set", "outlier_fraction=0.9"]) == 2


class TestBench:
    def test_csv_and_plot(self, tmp_path, capsys):
        out, fig = tmp_path / "bench.csv", tmp_path / "bench.png"
        assert main(["bench", "--sizes", "16,32,64", "--min-time", "0", "--out", str(out),
                     "--plot", str(fig)]) == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["mode", "N", "d", "T", "n", "wall_ms", "peak_matrix_elems"]
        assert len(rows) == 7
        assert {r[0] for r in rows[1:]} == {"iterative", "closed_form"}
        assert fig.stat().st_size > 1000
        assert "slope" in capsys.readouterr().err

    def test_threads_flag(self, tmp_path):
        assert main(["--threads", "1", "bench", "--sizes", "16", "--min-time", "0",
                     "--out", str(tmp_path / "b.csv")]) == 0
