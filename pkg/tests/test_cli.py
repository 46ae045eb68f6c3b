import json
import subprocess
import sys

import numpy as np

from splatgen.assets import humanoid_skeleton, procedural_test_asset, save_asset
from splatgen.cli import main
from splatgen.dataset import write_coco_wb
from splatgen.evaluation import EmbeddingSet, save_embeddings

from helpers import make_record


def demo_config(tmp_path, **kw):
    assert main(["make-demo", str(tmp_path / "demo"), "--gaussians", "400", "--frames", "2",
                 "--size", "48", *sum(([f"--{k}", str(v)] for k, v in kw.items()), [])]) == 0
    return tmp_path / "demo" / "run.yaml"


def test_generate_and_summarize(tmp_path, capsys):
    cfg = demo_config(tmp_path)
    out = tmp_path / "out"
    assert main(["generate", "--config", str(cfg), "--output", str(out), "--workers", "2"]) == 0
    assert (out / "manifest.json").exists()
    capsys.readouterr()
    assert main(["summarize", "--manifest", str(out / "manifest.json")]) == 0
    text = capsys.readouterr().out
    assert "Total" in text and "#Frames" in text
    # Existing output without --overwrite is refused as a usage error.
    assert main(["generate", "--config", str(cfg), "--output", str(out)]) == 2
    assert main(["generate", "--config", str(cfg), "--output", str(out), "--overwrite", "--seed", "4"]) == 0


def test_generate_invalid_config(tmp_path):
    (tmp_path / "c.yaml").write_text("seed: 1\n")
    assert main(["generate", "--config", str(tmp_path / "c.yaml")]) == 2
    assert main(["generate", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["generate"]) == 2


def test_generate_partial_failure(tmp_path):
    cfg = demo_config(tmp_path, clips=6)
    (tmp_path / "demo" / "assets" / "subject01.gsa").write_bytes(b"junk")
    assert main(["generate", "--config", str(cfg)]) == 1


def test_validate_asset(tmp_path, capsys):
    save_asset(procedural_test_asset(50, humanoid_skeleton(), 0), tmp_path / "a.gsa")
    assert main(["validate-asset", str(tmp_path / "a.gsa")]) == 0
    assert "50 gaussians" in capsys.readouterr().out
    (tmp_path / "b.gsa").write_bytes(b"nope")
    assert main(["validate-asset", str(tmp_path / "b.gsa")]) == 1


def test_evaluate_ap_report(tmp_path):
    write_coco_wb([make_record(i, seed=i) for i in range(1, 4)], tmp_path / "gt.json")
    rep = tmp_path / "rep.json"
    assert main(["evaluate", "ap", "--gt", str(tmp_path / "gt.json"), "--pred", str(tmp_path / "gt.json"),
                 "--report", str(rep)]) == 0
    r = json.loads(rep.read_text())
    assert r["ap"] == {"5": 100.0, "10": 100.0, "15": 100.0}
    assert r["fid"] is None and r["kid"] is None and r["config"]["metric"] == "ap"
    assert main(["evaluate", "ap", "--gt", str(tmp_path / "gt.json")]) == 2


def test_evaluate_fid_kid(tmp_path):
    g = np.random.default_rng(0)
    save_embeddings(EmbeddingSet(g.normal(size=(300, 8))), tmp_path / "a.emb")
    save_embeddings(EmbeddingSet(g.normal(size=(300, 8))), tmp_path / "b.emb")
    rep = tmp_path / "r.json"
    assert main(["evaluate", "fid", "--real", str(tmp_path / "a.emb"), "--fake", str(tmp_path / "a.emb"),
                 "--report", str(rep)]) == 0
    assert abs(json.loads(rep.read_text())["fid"]) < 1e-6
    assert main(["evaluate", "kid", "--real", str(tmp_path / "a.emb"), "--fake", str(tmp_path / "b.emb"),
                 "--block", "50", "--report", str(rep)]) == 0
    r = json.loads(rep.read_text())
    assert r["config"]["block"] == 50 and isinstance(r["kid"], float)
    assert main(["evaluate", "kid", "--real", str(tmp_path / "a.emb"), "--fake", str(tmp_path / "b.emb"),
                 "--block", "1000"]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "splatgen", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "generate" in out.stdout
