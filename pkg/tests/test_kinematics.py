import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splatgen.assets import chain_skeleton, humanoid_skeleton, make_asset, procedural_test_asset
from splatgen.geometry import quat_from_axis_angle, random_unit_quaternions
from splatgen.kinematics import (PoseError, PoseFrame, forward_kinematics, lbs_deform, load_motion,
                                 procedural_motion, save_motion)

from oracles import fk_oracle, lbs_oracle


def random_pose(g, n_joints, translate=True):
    return PoseFrame(random_unit_quaternions(g, n_joints),
                     g.normal(size=3) if translate else np.zeros(3),
                     random_unit_quaternions(g, 1)[0])


def random_asset(g, n, skeleton, k=4):
    jn = skeleton.n_joints
    dense = np.zeros((n, jn))
    for i in range(n):
        idx = g.choice(jn, size=min(k, jn), replace=False)
        dense[i, idx] = g.uniform(0.05, 1, size=idx.size)
    dense /= dense.sum(axis=1, keepdims=True)
    return make_asset(g.normal(size=(n, 3)), random_unit_quaternions(g, n),
                      g.uniform(0.01, 0.2, size=(n, 3)), g.uniform(size=n),
                      g.normal(size=(n, 4, 3)), dense, skeleton, sh_degree=1)


def test_identity_pose_keeps_rest_joints():
    sk = humanoid_skeleton()
    jt = forward_kinematics(sk, PoseFrame.identity(sk.n_joints))
    rest = sk.rest_positions()
    np.testing.assert_allclose(jt.joints, rest, atol=1e-12)
    for t, r in zip(jt.transforms, rest):
        np.testing.assert_allclose((t @ np.r_[r, 1])[:3], r, atol=1e-12)


def test_pure_root_translation():
    sk = humanoid_skeleton()
    t = np.array([0.3, -1.0, 2.0])
    pose = PoseFrame(PoseFrame.identity(sk.n_joints).joint_rotations, t)
    jt = forward_kinematics(sk, pose)
    np.testing.assert_allclose(jt.joints, sk.rest_positions() + t, atol=1e-12)


def test_two_joint_chain_rotated_root():
    sk = chain_skeleton(2, offset=(0.0, 1.0, 0.0))
    q = PoseFrame.identity(2).joint_rotations
    q[0] = quat_from_axis_angle([0, 0, 1], np.pi / 2)
    jt = forward_kinematics(sk, PoseFrame(q))
    # Hand composition: Rz(90) [0,1,0] = [-1,0,0].
    rz = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])
    np.testing.assert_allclose(jt.joints[1], rz @ [0, 1, 0], atol=1e-12)
    np.testing.assert_allclose(jt.joints[1], [-1, 0, 0], atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_fk_matches_chain_walk_oracle(seed):
    g = np.random.default_rng(seed)
    sk = humanoid_skeleton()
    pose = random_pose(g, sk.n_joints)
    jt = forward_kinematics(sk, pose)
    t_ref, j_ref = fk_oracle(sk, pose)
    np.testing.assert_allclose(jt.transforms, t_ref, atol=1e-12)
    np.testing.assert_allclose(jt.joints, j_ref, atol=1e-12)
    # Invariant: every transform is rigid.
    r = jt.transforms[:, :3, :3]
    np.testing.assert_allclose(r @ r.transpose(0, 2, 1), np.broadcast_to(np.eye(3), r.shape), atol=1e-5)
    np.testing.assert_array_equal(jt.transforms[:, 3], np.broadcast_to([0, 0, 0, 1.0], (sk.n_joints, 4)))


def test_fk_errors():
    sk = humanoid_skeleton()
    with pytest.raises(PoseError, match="joints"):
        forward_kinematics(sk, PoseFrame.identity(3))
    q = PoseFrame.identity(sk.n_joints).joint_rotations
    q[4] = [0.5, 0, 0, 0]
    with pytest.raises(PoseError, match="non-unit"):
        forward_kinematics(sk, PoseFrame(q))


def test_lbs_identity_is_noop():
    sk = humanoid_skeleton()
    a = procedural_test_asset(300, sk, 1, sh_degree=1)
    d = lbs_deform(a, np.broadcast_to(np.eye(4), (sk.n_joints, 4, 4)).copy())
    np.testing.assert_array_equal(d.centroids, a.centroids.astype(np.float64))
    np.testing.assert_array_equal(d.linear, np.broadcast_to(np.eye(3), (300, 3, 3)))
    d2 = lbs_deform(a, forward_kinematics(sk, PoseFrame.identity(sk.n_joints)))
    np.testing.assert_array_equal(d2.centroids, a.centroids.astype(np.float64))


def test_lbs_translation_and_blend():
    g = np.random.default_rng(0)
    sk = chain_skeleton(2)
    n = 20
    c = g.normal(size=(n, 3))
    base = dict(rotations=random_unit_quaternions(g, n), scales=g.uniform(0.1, 0.2, size=(n, 3)),
                opacities=np.full(n, 0.5), features=np.zeros((n, 1, 3)))
    t1, t2 = np.array([1.0, 2, 3]), np.array([-1.0, 0.5, 4])
    ts = np.stack([np.eye(4)] * 2)
    ts[0, :3, 3], ts[1, :3, 3] = t1, t2
    rigid = make_asset(c, base["rotations"], base["scales"], base["opacities"], base["features"],
                       np.tile([1.0, 0.0], (n, 1)), sk)
    d = lbs_deform(rigid, ts)
    np.testing.assert_allclose(d.centroids, rigid.centroids + t1, atol=1e-6)
    ident = lbs_deform(rigid, np.stack([np.eye(4)] * 2))
    np.testing.assert_allclose(d.covariances, ident.covariances, atol=1e-15)
    half = make_asset(c, base["rotations"], base["scales"], base["opacities"], base["features"],
                      np.tile([0.5, 0.5], (n, 1)), sk)
    d = lbs_deform(half, ts)
    np.testing.assert_allclose(d.centroids, half.centroids + (t1 + t2) / 2, atol=1e-6)


def test_lbs_dense_oracle_random_three_joint():
    g = np.random.default_rng(5)
    sk = chain_skeleton(3, offset=(0.2, 0.5, -0.1))
    a = random_asset(g, 50, sk, k=3)
    jt = forward_kinematics(sk, random_pose(g, 3))
    d = lbs_deform(a, jt)
    c_ref, cov_ref = lbs_oracle(a, jt.transforms)
    np.testing.assert_allclose(d.centroids, c_ref, atol=1e-6)
    np.testing.assert_allclose(d.covariances, cov_ref, atol=1e-6)
    np.testing.assert_array_equal(d.opacities, a.opacities.astype(np.float64))
    np.testing.assert_array_equal(d.features, a.features.astype(np.float64))
    assert d.n_gaussians == a.n_gaussians


def test_lbs_dimension_mismatch():
    a = procedural_test_asset(30, humanoid_skeleton(), 0)
    with pytest.raises(PoseError):
        lbs_deform(a, np.stack([np.eye(4)] * 3))


def test_motion_round_trip(tmp_path):
    sk = humanoid_skeleton()
    m = procedural_motion(sk, 5, seed=2)
    save_motion(m, tmp_path / "m.motion.json")
    m2 = load_motion(tmp_path / "m.motion.json")
    assert len(m2) == 5 and m2.fps == m.fps
    for a, b in zip(m.frames, m2.frames):
        np.testing.assert_array_equal(a.joint_rotations, b.joint_rotations)
        np.testing.assert_array_equal(a.root_translation, b.root_translation)


def test_motion_file_errors(tmp_path):
    p = tmp_path / "bad.motion.json"
    p.write_text('{"frames": []}')
    with pytest.raises(PoseError, match="no frames"):
        load_motion(p)
    p.write_text('{"frames": [{"joint_rotations": [[2, 0, 0, 0]]}]}')
    with pytest.raises(PoseError, match="frame 0"):
        load_motion(p)
