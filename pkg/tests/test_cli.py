import json
from pathlib import Path

import numpy as np
import pytest

from crowdseg.cli import main
from crowdseg.evaluation import load_report
from crowdseg.manifest import read_manifest
from crowdseg.pnm import write_grayscale


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main([
        "synth", "--out", str(out), "--images", "12", "--ambiguous-frac", "0.25",
        "--pool", "3", "--size", "32", "--seed", "5",
    ]) == 0
    return out


def test_synth_manifest_is_complete(corpus):
    records = read_manifest(corpus / "manifest.jsonl")
    assert len(records) == 12
    assert all(len(r.annotations) == 3 for r in records)
    assert all("judgers" in r.labels for r in records)
    assert all((corpus / r.path).exists() for r in records)


def test_ingest_builds_manifest(tmp_path):
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    rng = np.random.default_rng(0)
    for k in range(3):
        write_grayscale(rng.random((10, 12)), img_dir / f"pic{k}.pgm")
    out = tmp_path / "manifest.jsonl"
    assert main(["ingest", "--images", str(img_dir), "--out", str(out)]) == 0
    records = read_manifest(out)
    assert [r.image_id for r in records] == ["pic0", "pic1", "pic2"]
    assert records[0].width == 12 and records[0].height == 10


def test_train_then_score_then_plan(corpus, tmp_path):
    model = tmp_path / "model.json"
    report = tmp_path / "cv.csv"
    assert main([
        "train", "--manifest", str(corpus / "manifest.jsonl"), "--out", str(model),
        "--report", str(report), "--seed", "3",
    ]) == 0
    body = json.loads(model.read_text())
    assert body["feature"] == "grad-hist-128"
    assert len(load_report(report)) >= 1

    scores = tmp_path / "scores.tsv"
    assert main([
        "score", "--manifest", str(corpus / "manifest.jsonl"),
        "--model", str(model), "--out", str(scores),
    ]) == 0
    assert len(scores.read_text().splitlines()) == 12

    plan = tmp_path / "plan.csv"
    assert main([
        "plan", "--manifest", str(corpus / "manifest.jsonl"), "--scores", str(scores),
        "--budget", "3", "--extra", "2", "--out", str(plan),
    ]) == 0
    rows = load_report(plan)
    assert len(rows) == 3 and rows[0]["strategy"] == "greedy"


def test_plan_random_is_seeded(corpus, tmp_path):
    out1, out2 = tmp_path / "p1.csv", tmp_path / "p2.csv"
    for out in (out1, out2):
        assert main([
            "plan", "--manifest", str(corpus / "manifest.jsonl"), "--strategy", "random",
            "--budget", "4", "--seed", "9", "--out", str(out),
        ]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_simulate_emits_threshold_table(corpus, tmp_path):
    out = tmp_path / "wp.csv"
    assert main([
        "simulate", "--manifest", str(corpus / "manifest.jsonl"), "--out", str(out),
        "--mode", "seg", "--thresholds", "0,0.5,1",
    ]) == 0
    rows = load_report(out)
    assert [float(r["threshold"]) for r in rows] == [0.0, 0.5, 1.0]
    assert int(rows[0]["consumed"]) == 24  # two annotations per image floor


def test_curve_writes_table_and_figure(corpus, tmp_path):
    out = tmp_path / "curves.csv"
    assert main([
        "curve", "--manifest", str(corpus / "manifest.jsonl"), "--out", str(out),
        "--extra", "2", "--strategies", "perfect,status_quo,wp-seg",
        "--seeds", "5", "--measure", "region",
    ]) == 0
    rows = load_report(out)
    strategies = {r["strategy"] for r in rows}
    assert strategies == {"perfect", "status_quo", "wp_seg"}
    assert out.with_suffix(".png").exists()


def test_report_diversity_and_agreement(corpus, tmp_path):
    div = tmp_path / "div.csv"
    assert main([
        "report", "--kind", "diversity", "--manifest", str(corpus / "manifest.jsonl"),
        "--out", str(div),
    ]) == 0
    rows = load_report(div)
    assert len(rows) == 36  # 12 images x 3 annotations
    assert {r["image_id"] for r in rows} == {f"img{k:04d}" for k in range(12)}

    agr = tmp_path / "agr.csv"
    assert main([
        "report", "--kind", "agreement", "--manifest", str(corpus / "manifest.jsonl"),
        "--out", str(agr),
    ]) == 0
    rows = load_report(agr)
    assert len(rows) == 4
    total = sum(float(r["fraction"]) for r in rows)
    assert total == pytest.approx(1.0)


def test_report_pr_with_figure(corpus, tmp_path):
    scores = tmp_path / "scores.tsv"
    records = read_manifest(corpus / "manifest.jsonl")
    lines = [
        f"{r.image_id}\t{1.0 if r.labels['judgers'] == 'unambiguous' else 0.0}"
        for r in records
    ]
    scores.write_text("\n".join(lines) + "\n")
    out = tmp_path / "pr.csv"
    assert main([
        "report", "--kind", "pr", "--manifest", str(corpus / "manifest.jsonl"),
        "--scores", str(scores), "--out", str(out), "--figure",
    ]) == 0
    rows = load_report(out)
    assert float(rows[0]["average_precision"]) == 1.0
    assert out.with_suffix(".png").exists()


def test_score_conversion_paths(corpus, tmp_path):
    records = read_manifest(corpus / "manifest.jsonl")
    ids = [r.image_id for r in records]

    det = tmp_path / "det.tsv"
    det.write_text("\n".join(f"{i}\t0,0,9,9\t0.8" for i in ids) + "\n")
    out = tmp_path / "feng.tsv"
    assert main([
        "score", "--manifest", str(corpus / "manifest.jsonl"),
        "--detections", str(det), "--out", str(out),
    ]) == 0
    assert all(line.endswith("0.8") for line in out.read_text().splitlines())

    sub = tmp_path / "sub.tsv"
    sub.write_text("\n".join(f"{i}\t0.0,1.0,0.0,0.0,0.0" for i in ids) + "\n")
    out2 = tmp_path / "sos.tsv"
    assert main([
        "score", "--manifest", str(corpus / "manifest.jsonl"),
        "--subitizing", str(sub), "--out", str(out2),
    ]) == 0
    assert len(out2.read_text().splitlines()) == len(ids)


def test_curve_determinism_bytes(corpus, tmp_path):
    outs = []
    for name in ("c1.csv", "c2.csv"):
        out = tmp_path / name
        assert main([
            "curve", "--manifest", str(corpus / "manifest.jsonl"), "--out", str(out),
            "--extra", "2", "--strategies", "perfect,status_quo", "--seeds", "4",
            "--seed", "13", "--measure", "both", "--no-figure",
        ]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_error_exit_code(tmp_path):
    missing = tmp_path / "nope.jsonl"
    missing.write_text("")
    assert main([
        "report", "--kind", "diversity", "--manifest", str(missing),
        "--out", str(tmp_path / "x.csv"),
    ]) == 2
