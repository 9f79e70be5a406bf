from __future__ import annotations

import json
import subprocess
import sys

import pytest

from fakeprobe import __version__
from fakeprobe.cli import main
from fakeprobe.synthetic import make_corpus


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err: str) -> dict:
    lines = [ln for ln in err.splitlines() if ln.strip()]
    assert len(lines) == 1, err
    obj = json.loads(lines[0])
    assert set(obj) == {"error", "exit_code", "message"}
    return obj


@pytest.fixture(scope="module")
def detector(marker_manifest, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-det") / "det.json"
    assert main(["train-detector", "--manifest", str(marker_manifest), "--mode", "hybrid", "--backend", "toy",
                 "--seed", "0", "--n-per-class", "60", "--epochs", "15", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def image_detector(small_manifest, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-img") / "img.json"
    assert main(["train-detector", "--manifest", str(small_manifest), "--mode", "image_only", "--seed", "0",
                 "--n-per-class", "20", "--epochs", "2", "--resolution", "8", "--stem-channels", "4",
                 "--block-channels", "4", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def attributor(attribution_manifest, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-attr") / "attr.json"
    assert main(["train-attributor", "--manifest", str(attribution_manifest), "--mode", "hybrid", "--backend",
                 "toy", "--seed", "0", "--n-per-class", "60", "--epochs", "30", "--out", str(out)]) == 0
    return out


def test_training_outputs(detector):
    stem = detector.with_suffix("")
    hist = json.loads((detector.parent / (stem.name + ".history")).read_text())
    split = json.loads((detector.parent / (stem.name + ".split.json")).read_text())
    echo = json.loads((detector.parent / (stem.name + ".config.json")).read_text())
    assert hist
    assert split["label_scheme"] == "detection"
    assert {rid for rid, _ in split["train"]}.isdisjoint(rid for rid, _ in split["test"])
    assert echo["subcommand"] == "train-detector"
    assert echo["seed"] == 0
    assert echo["version"] == __version__
    assert echo["flags"]["n_per_class"] == 60
    assert str(detector) in echo["paths"]["outputs"]


def test_missing_backend_for_hybrid(capsys, marker_manifest, tmp_path):
    code, _, err = run(capsys, "train-detector", "--manifest", marker_manifest, "--mode", "hybrid", "--seed", 0,
                       "--n-per-class", 10, "--out", tmp_path / "m.json")
    assert code == 2
    assert error_of(err)["error"] == "UsageError"
    assert not (tmp_path / "m.json").exists()


def test_missing_seed_is_usage_error(capsys, marker_manifest, tmp_path):
    code, _, err = run(capsys, "train-detector", "--manifest", marker_manifest, "--mode", "image_only",
                       "--n-per-class", 10, "--out", tmp_path / "m.json")
    assert code == 2 and error_of(err)["exit_code"] == 2


def test_unknown_subcommand(capsys):
    code, _, err = run(capsys, "frobnicate")
    assert code == 2 and error_of(err)["error"] == "UsageError"


def test_missing_manifest_is_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "fingerprint", "--manifest", tmp_path / "absent.jsonl", "--source", "SD")
    assert code == 3
    assert error_of(err)["exit_code"] == 3


def test_unknown_backend_is_backend_error(capsys, marker_manifest, tmp_path):
    code, _, err = run(capsys, "train-detector", "--manifest", marker_manifest, "--mode", "hybrid",
                       "--backend", "nope", "--seed", 0, "--n-per-class", 10, "--out", tmp_path / "m.json")
    assert code == 4 and error_of(err)["error"] == "UnknownBackend"


def test_detect_single_image_to_stdout(capsys, detector, marker_manifest):
    from fakeprobe.dataset import load_manifest

    rec = load_manifest(marker_manifest).by_origin("SD")[0]
    code, out, _ = run(capsys, "detect", "--model", detector, "--image", rec.image_path, "--prompt", rec.prompt)
    assert code == 0
    row = json.loads(out)
    assert set(row) == {"id", "label", "confidence", "prompt_provenance"}
    assert row["label"] == "fake" and row["prompt_provenance"] == "natural"


def test_detect_needs_prompt_or_captioner(capsys, detector, marker_manifest):
    from fakeprobe.dataset import load_manifest

    rec = load_manifest(marker_manifest).by_origin("SD")[0]
    code, _, err = run(capsys, "detect", "--model", detector, "--image", rec.image_path)
    assert code != 0 and error_of(err)["exit_code"] == code
    code, out, _ = run(capsys, "detect", "--model", detector, "--image", rec.image_path, "--captioner", "toy")
    assert code == 0 and json.loads(out)["prompt_provenance"] == "generated"


def test_detect_image_xor_manifest(capsys, detector, marker_manifest):
    code, _, _ = run(capsys, "detect", "--model", detector)
    assert code == 2


def test_detect_manifest_jsonl(capsys, detector, marker_manifest, tmp_path):
    out = tmp_path / "verdicts.jsonl"
    code, _, _ = run(capsys, "detect", "--model", detector, "--manifest", marker_manifest, "--out", out)
    assert code == 0
    rows = [json.loads(ln) for ln in out.read_text().splitlines()]
    assert len(rows) == 500
    assert (tmp_path / "verdicts.config.json").is_file()


def test_attribute_sweep_rows(capsys, attributor, attribution_manifest, tmp_path):
    out = tmp_path / "sweep.tsv"
    split = attributor.parent / "attr.split.json"
    code, _, err = run(capsys, "attribute", "--model", attributor, "--manifest", attribution_manifest, "--sweep",
                       "--n-per-class", 20, "--exclude-split", split, "--out", out, "--plot", tmp_path / "sweep.png")
    assert code == 0, err
    lines = out.read_text().splitlines()
    assert lines[0] == "threshold\taccuracy"
    assert len(lines) == 1 + 11
    assert [float(ln.split("\t")[0]) for ln in lines[1:]] == [i / 10 for i in range(11)]
    summary = json.loads((tmp_path / "sweep.json").read_text())
    assert summary["n_eval"] == 5 * 20  # the whole open-set draw is evaluated
    assert (tmp_path / "sweep.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_attribute_threshold_routes_unseen(capsys, attributor, attribution_manifest):
    from fakeprobe.dataset import load_manifest

    rec = load_manifest(attribution_manifest).by_origin("LD")[0]
    code, out, _ = run(capsys, "attribute", "--model", attributor, "--image", rec.image_path, "--prompt",
                       rec.prompt, "--threshold", 1.0)
    assert code == 0 and json.loads(out)["source"] == "unseen"


def test_attribute_bad_threshold(capsys, attributor, attribution_manifest):
    from fakeprobe.dataset import load_manifest

    rec = load_manifest(attribution_manifest).by_origin("LD")[0]
    code, _, err = run(capsys, "attribute", "--model", attributor, "--image", rec.image_path, "--prompt",
                       rec.prompt, "--threshold", 1.5)
    assert code == 2 and error_of(err)["error"] == "BadThreshold"


def test_eval_table(capsys, detector, marker_manifest, tmp_path):
    out = tmp_path / "eval.tsv"
    split = detector.parent / "det.split.json"
    code, _, err = run(capsys, "eval", "--model", detector, "--manifest", marker_manifest, "--exclude-split", split,
                       "--train-source", "SD", "--out", out)
    assert code == 0, err
    lines = out.read_text().splitlines()
    assert lines[0].split("\t") == ["train_source", "eval_origin", "dataset_tag", "accuracy", "n_total"]
    assert len(lines) == 2
    assert float(lines[1].split("\t")[3]) >= 0.95
    assert json.loads((tmp_path / "eval.json").read_text())["prompts"] == "natural"


def test_fingerprint_outputs(capsys, small_manifest, tmp_path):
    out = tmp_path / "fp.json"
    code, _, err = run(capsys, "fingerprint", "--manifest", small_manifest, "--source", "SD", "--n", 10, "--out", out)
    assert code == 0, err
    fp = json.loads(out.read_text())
    assert fp["source"] == "SD" and fp["n_images"] == 10
    assert len(fp["magnitudes"]) == fp["H"] * fp["W"]
    assert (tmp_path / "fp.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert (tmp_path / "fp.config.json").is_file()


def test_fingerprint_too_few(capsys, small_manifest, tmp_path):
    code, _, err = run(capsys, "fingerprint", "--manifest", small_manifest, "--source", "SD", "--n", 1000,
                       "--out", tmp_path / "fp.json")
    assert code == 3 and error_of(err)["error"] == "InsufficientRecords"


def test_cluster_requires_min_pts(capsys, small_manifest, tmp_path):
    code, _, err = run(capsys, "prompt-analyze", "cluster", "--manifest", small_manifest, "--out", tmp_path / "c.tsv",
                       "--eps", 0.5)
    assert code == 2 and "min-pts" in error_of(err)["message"]
    code, _, _ = run(capsys, "prompt-analyze", "cluster", "--manifest", small_manifest, "--out", tmp_path / "c.tsv",
                     "--eps", 0, "--min-pts", 3)
    assert code == 2


def test_prompt_analyses_write_reports(capsys, image_detector, tmp_path):
    root = tmp_path / "paired"
    manifest = make_corpus(root, {"real": 12, "SD": 12}, seed=3, size=8, paired=True)
    for analysis, extra in [
        ("connection", []),
        ("descriptiveness", ["--model", image_detector]),
        ("topics", ["--model", image_detector]),
        ("cluster", ["--eps", 0.6, "--min-pts", 2, "--model", image_detector]),
        ("structure", ["--model", image_detector]),
    ]:
        out = tmp_path / f"{analysis}.tsv"
        code, _, err = run(capsys, "prompt-analyze", analysis, "--manifest", manifest, "--out", out, *extra)
        assert code == 0, (analysis, err)
        assert out.read_text().splitlines()[0]
        assert (tmp_path / f"{analysis}.config.json").is_file()


def test_authenticity_rejects_hybrid_detector(capsys, detector, small_manifest, tmp_path):
    code, _, err = run(capsys, "prompt-analyze", "topics", "--manifest", small_manifest, "--model", detector,
                       "--out", tmp_path / "t.tsv")
    assert code == 3 and error_of(err)["error"] == "ModelFormatError"


def test_descriptiveness_use_captions_needs_captioner(capsys, small_manifest, tmp_path):
    code, _, _ = run(capsys, "prompt-analyze", "descriptiveness", "--manifest", small_manifest, "--use-captions",
                     "--out", tmp_path / "d.tsv")
    assert code == 2


def test_cache_env_cold_and_warm_identical(capsys, small_manifest, tmp_path, monkeypatch):
    monkeypatch.setenv("FAKEPROBE_CACHE_DIR", str(tmp_path / "cache"))
    outs = []
    for i in range(2):
        out = tmp_path / f"c{i}.tsv"
        code, _, err = run(capsys, "prompt-analyze", "descriptiveness", "--manifest", small_manifest, "--out", out)
        assert code == 0, err
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert (tmp_path / "cache" / "toy-joint.emb.jsonl").stat().st_size > 0


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "fakeprobe.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.strip() == f"fakeprobe {__version__}"


def test_console_script_error_line(tmp_path):
    res = subprocess.run([sys.executable, "-m", "fakeprobe.cli", "fingerprint", "--manifest",
                          str(tmp_path / "none.jsonl"), "--source", "SD"], capture_output=True, text=True)
    assert res.returncode == 3
    assert json.loads(res.stderr)["exit_code"] == 3
