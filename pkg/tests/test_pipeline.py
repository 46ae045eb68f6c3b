import json
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from splatgen.config import ConfigError, RunConfig, config_from_dict, load_config
from splatgen.dataset import DatasetManifest, read_coco
from splatgen.demo import make_demo
from splatgen.evaluation import evaluate_coco_ap
from splatgen.pipeline import PipelineError, run_pipeline, sample_scene


@pytest.fixture
def demo(tmp_path):
    path = make_demo(tmp_path / "demo", n_assets=2, n_motions=1, n_gaussians=600, n_frames=3,
                     size=64, clips=2)
    return load_config(path)


def tree_bytes(root: Path, skip=("run_log.json",)):
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name not in skip}


def test_sample_scene_determinism_and_singletons(demo):
    assert sample_scene(demo, 5) == sample_scene(demo, 5)
    one = sample_scene(demo, 9, ["only"], ["bg"], ["mo"])
    assert (one.asset_id, one.background_id, one.motion_id) == ("only", "bg", "mo")
    with pytest.raises(PipelineError, match="empty"):
        sample_scene(demo, 0, [], ["bg"], ["mo"])


def test_sample_scene_asset_frequencies(demo):
    ids = ["a", "b", "c", "d"]
    counts = Counter(sample_scene(demo, i, ids, ["bg"], ["mo"]).asset_id for i in range(10_000))
    for k in ids:
        assert 0.22 <= counts[k] / 10_000 <= 0.28


def test_sample_scene_draws_are_independent(demo):
    # Asset and background choices for the same clip come from different streams.
    ids = ["a", "b", "c", "d"]
    pairs = Counter((s.asset_id, s.background_id) for s in
                    (sample_scene(demo, i, ids, ids, ["mo"]) for i in range(8_000)))
    assert len(pairs) == 16
    assert max(pairs.values()) / 8_000 < 0.08


def test_run_counts(demo, tmp_path):
    cfg = demo.with_overrides(output_dir=tmp_path / "out")
    m = run_pipeline(cfg)
    assert len(m.clips) == 2 and m.totals()["frames"] == 6 and not m.failed
    assert len(list((tmp_path / "out" / "images").rglob("*.png"))) == 6
    coco = {s: read_coco(tmp_path / "out" / "annotations" / f"{s}.json") for s in ("train", "valid")}
    assert sum(len(c["images"]) for c in coco.values()) == 6
    for c in coco.values():
        for ann in c["annotations"]:
            assert len(ann["keypoints"]) == 69
        if c["annotations"]:
            assert evaluate_coco_ap(c, c)[5.0] == 100.0
    saved = DatasetManifest.load(tmp_path / "out" / "manifest.json")
    saved.validate()
    assert saved.to_dict() == m.to_dict()
    log = json.loads((tmp_path / "out" / "run_log.json").read_text())
    assert [c["status"] for c in log["clips"]] == ["ok", "ok"]


def test_deterministic_across_workers(demo, tmp_path):
    run_pipeline(demo.with_overrides(workers=1, output_dir=tmp_path / "w1"))
    run_pipeline(demo.with_overrides(workers=8, output_dir=tmp_path / "w8"))
    a, b = tree_bytes(tmp_path / "w1"), tree_bytes(tmp_path / "w8")
    assert a.keys() == b.keys() and a == b


def test_refuses_to_overwrite(demo, tmp_path):
    cfg = demo.with_overrides(output_dir=tmp_path / "o")
    run_pipeline(cfg)
    with pytest.raises(PipelineError, match="already"):
        run_pipeline(cfg)
    run_pipeline(cfg, overwrite=True)


def test_empty_motions_dir_fails_validation(demo, tmp_path):
    empty = tmp_path / "nomotions"
    empty.mkdir()
    cfg = replace(demo, motions_dir=empty, output_dir=tmp_path / "o")
    with pytest.raises(ConfigError, match="motions"):
        run_pipeline(cfg)
    assert not (tmp_path / "o").exists()


def test_failure_isolation(demo, tmp_path):
    # A corrupt asset aborts only the clips that drew it.
    bad = Path(demo.assets_dir) / "subject01.gsa"
    bad.write_bytes(b"GARBAGE!")
    cfg = replace(demo, clips=6, output_dir=tmp_path / "o")
    m = run_pipeline(cfg)
    assert m.failed and m.clips
    assert all("AssetError" in f["error"] for f in m.failed)
    assert all(c.asset_id == "subject00" for c in m.clips)
    assert len(m.failed) + len(m.clips) == 6
    saved = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert len(saved["failed_clips"]) == len(m.failed)


def test_subject_disjoint_splits(demo, tmp_path):
    m = run_pipeline(replace(demo, clips=6, output_dir=tmp_path / "o"))
    split_of = {}
    for c in m.clips:
        assert split_of.setdefault(c.subject_id, c.split) == c.split
    assert set(split_of.values()) == {"train", "valid"}


def test_split_plan_and_default():
    cfg = RunConfig(Path("."), Path("."), Path("."), Path("."), split_plan={"x": "valid"})
    assert cfg.split_for("x") == "valid"


def test_config_parsing(tmp_path, demo):
    d = {"dictionaries": {"assets": "a", "backgrounds": "b", "motions": "m"}, "seed": 3,
         "render": {"width": 32, "height": 48, "tile_size": 8}, "orbit": {"radius_m": [2, 3]}}
    cfg = config_from_dict(d, tmp_path)
    assert cfg.assets_dir == tmp_path / "a" and cfg.orbit.seed == 3
    assert (cfg.orbit.width, cfg.orbit.height, cfg.render.tile_size) == (32, 48, 8)
    assert cfg.with_overrides(seed=9).orbit.seed == 9
    for bad in ({}, {**d, "render": {"bogus": 1}}, {**d, "orbit": {"radius_m": [3, 2]}}):
        with pytest.raises(ConfigError):
            config_from_dict(bad, tmp_path)
    with pytest.raises(ConfigError):
        config_from_dict(d, tmp_path).validate()
    (tmp_path / "bad.yaml").write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")
    assert demo.n_clips == 2
    assert replace(demo, clips=None).n_clips == 4  # 1 motion x 4 cameras per motion
    echo = demo.echo()
    assert "subject00" in echo["assets"] and not any("/" in str(v) for v in echo.values())
