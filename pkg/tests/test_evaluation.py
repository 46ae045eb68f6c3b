import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splatgen.evaluation import (EmbeddingSet, EvaluationError, ap_at_threshold, ap_table,
                                 coco_keypoints, default_block, fid, kid, kid_blocks, kid_with_error,
                                 keypoint_errors, load_embeddings, mmd2_unbiased, save_embeddings)

N = 23


def kp(xy, v=2):
    a = np.zeros((N, 3))
    a[:, :2] = xy
    a[:, 2] = v
    return a


def test_identical_predictions():
    g = np.random.default_rng(0)
    gt = {i: kp(g.uniform(0, 200, size=(N, 2))) for i in range(5)}
    boxes = {i: (0, 0, 150, 200) for i in gt}
    for t in (5, 10, 15):
        assert ap_at_threshold(gt, gt, boxes, t) == 100.0


def test_far_predictions():
    gt = {1: kp(np.zeros((N, 2)))}
    pred = {1: kp(np.full((N, 2), 1e3))}
    assert ap_at_threshold(pred, gt, {1: (0, 0, 180, 240)}, 5) == 0.0


def test_boundary_counts_as_correct():
    # Two labelled keypoints: bbox diag 500 with ref 500 -> scale 1.
    gt = kp(np.zeros((N, 2)), v=0)
    gt[0, 2] = gt[1, 2] = 2
    pred = gt.copy()
    pred[0, :2] = [3.0, 4.0]   # distance 5 = t
    pred[1, :2] = [6.0, 8.0]   # distance 10 = 2t
    assert ap_at_threshold({0: pred}, {0: gt}, {0: (0, 0, 300, 400)}, 5.0, ref_size=500.0) == 50.0


def test_normalization_scale():
    gt = kp(np.zeros((N, 2)))
    pred = kp(np.full((N, 2), [3.0, 4.0]))  # 5 px
    # diag 1000 with ref 256 -> normalized 1.28 px
    e = keypoint_errors({0: pred}, {0: gt}, {0: (0, 0, 600, 800)})
    np.testing.assert_allclose(e, 5 * 256 / 1000)
    # Degenerate bbox falls back to raw pixels.
    np.testing.assert_allclose(keypoint_errors({0: pred}, {0: gt}, {0: (0, 0, 0, 0)}), 5.0)


def test_ap_errors():
    with pytest.raises(EvaluationError, match="share no"):
        ap_at_threshold({1: kp(0)}, {2: kp(0)}, {2: (0, 0, 1, 1)}, 5)
    with pytest.raises(EvaluationError, match="no labelled"):
        ap_at_threshold({1: kp(0)}, {1: kp(0, v=0)}, {1: (0, 0, 1, 1)}, 5)
    with pytest.raises(EvaluationError):
        ap_at_threshold({1: kp(0)}, {1: kp(0)}, {1: (0, 0, 1, 1)}, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.1, 40))
def test_ap_monotone_in_threshold(seed, noise):
    g = np.random.default_rng(seed)
    gt = {i: kp(g.uniform(0, 256, size=(N, 2))) for i in range(4)}
    pred = {i: kp(gt[i][:, :2] + g.normal(0, noise, size=(N, 2))) for i in gt}
    boxes = {i: (0, 0, 181.0, 181.0) for i in gt}
    t = ap_table(pred, gt, boxes, (5, 10, 15))
    assert 0 <= t[5.0] <= t[10.0] <= t[15.0] <= 100


def test_coco_keypoints_keeps_best_detection():
    anns = [{"image_id": 3, "keypoints": [1.0] * 69, "score": 0.2},
            {"image_id": 3, "keypoints": [2.0] * 69, "score": 0.9},
            {"image_id": 3, "keypoints": [5.0] * 69, "score": 0.5}]
    kps, _ = coco_keypoints(anns)
    assert kps[3][0, 0] == 2.0
    with pytest.raises(EvaluationError):
        coco_keypoints([{"image_id": 1, "keypoints": [0.0] * 10}])


def test_fid_identical_and_closed_form():
    g = np.random.default_rng(0)
    a = g.normal(size=(2000, 8))
    assert abs(fid(a, a)) < 1e-6
    # Two Gaussians with known moments: ||mu||^2 + tr(S1 + S2 - 2 (S1 S2)^1/2).
    s1 = np.diag([1.0, 4.0])
    s2 = np.diag([9.0, 1.0])
    mu = np.array([1.0, 2.0])
    expected = mu @ mu + (1 + 4 + 9 + 1) - 2 * (3 + 2)
    x = g.multivariate_normal([0, 0], s1, size=200_000)
    y = g.multivariate_normal(mu, s2, size=200_000)
    assert fid(x, y) == pytest.approx(expected, rel=0.02)


def test_fid_errors():
    with pytest.raises(EvaluationError, match="dimension"):
        fid(np.zeros((3, 2)), np.zeros((3, 3)))
    with pytest.raises(EvaluationError, match="two samples"):
        fid(np.zeros((1, 2)), np.zeros((3, 2)))


def test_fid_nonnegative_and_symmetric():
    g = np.random.default_rng(2)
    a, b = g.normal(size=(300, 5)), g.normal(0.3, 2, size=(400, 5))
    assert fid(a, b) >= 0
    assert fid(a, b) == pytest.approx(fid(b, a), rel=1e-9)


def test_kid_hand_computed_four_points():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    y = np.array([[1.0, 1.0], [0.0, 0.0]])
    # k = (x.y/2 + 1)^3. XX and YY off-diagonals both 1; XY = 3.375, 1, 3.375, 1.
    expected = 1.0 + 1.0 - 2.0 * (3.375 + 1 + 3.375 + 1) / 4
    assert expected == -2.375
    assert mmd2_unbiased(x, y) == expected
    assert kid(x, y, block=2) == expected


def test_kid_identical_distribution_centered():
    g = np.random.default_rng(7)
    a, b = g.normal(size=(2000, 16)), g.normal(size=(2000, 16))
    mean, se = kid_with_error(a, b, 100)
    assert abs(mean) < 3 * se


def test_kid_blocks_and_errors():
    g = np.random.default_rng(0)
    a, b = g.normal(size=(250, 4)), g.normal(size=(330, 4))
    assert kid_blocks(a, b, 100).shape == (2,)
    assert default_block(a[:40], b) == 40
    with pytest.raises(EvaluationError, match="exceeds"):
        kid(a, b, block=300)
    with pytest.raises(EvaluationError, match="dimension"):
        kid(a, np.zeros((10, 3)))
    with pytest.raises(EvaluationError):
        kid(a, b, block=1)
    # A large mean shift is detected.
    assert kid(a, b + 3.0) > 10 * abs(kid(a, b))


def test_embedding_file_round_trip(tmp_path):
    g = np.random.default_rng(0)
    e = EmbeddingSet(g.normal(size=(20, 6)).astype(np.float32).astype(np.float64), "unit")
    save_embeddings(e, tmp_path / "a.emb")
    e2 = load_embeddings(tmp_path / "a.emb")
    np.testing.assert_array_equal(e2.vectors, e.vectors)
    assert e2.source == "unit" and (e2.n, e2.d) == (20, 6)
    (tmp_path / "bad.emb").write_bytes(b"XXXX")
    with pytest.raises(EvaluationError):
        load_embeddings(tmp_path / "bad.emb")
    data = (tmp_path / "a.emb").read_bytes()
    (tmp_path / "short.emb").write_bytes(data[:-4])
    with pytest.raises(EvaluationError, match="header says"):
        load_embeddings(tmp_path / "short.emb")
