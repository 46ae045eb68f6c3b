import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splatgen.sh import C0, SHError, eval_sh, eval_sh_batch, sh_basis

from oracles import real_sh_scipy


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def test_dc_term_is_direction_independent():
    f0 = 0.25 / C0
    feats = np.full((1, 3), f0)
    for d in ([1, 0, 0], [0, -1, 0], unit([1, 2, 3])):
        np.testing.assert_allclose(eval_sh(feats, d), [0.75] * 3, atol=1e-12)


def test_degree1_parity():
    g = np.random.default_rng(0)
    f = g.normal(0, 0.05, size=(4, 3))
    v = unit(g.normal(size=3))
    plus, minus = eval_sh(f, v), eval_sh(f, -v)
    b1 = sh_basis(v, 1)[0, 1:]
    np.testing.assert_allclose(plus - minus, 2 * b1 @ f[1:], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_degree3_matches_scipy_expansion(seed):
    g = np.random.default_rng(seed)
    f = g.normal(0, 0.1, size=(16, 3))
    v = unit(g.normal(size=3))
    basis = real_sh_scipy(3, v)[0]
    expected = np.clip(sum(basis[k] * f[k] for k in range(16)) + 0.5, 0, 1)
    np.testing.assert_allclose(eval_sh(f, v), expected, atol=1e-6)


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_basis_matches_scipy(degree):
    g = np.random.default_rng(degree)
    d = g.normal(size=(64, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    np.testing.assert_allclose(sh_basis(d, degree), real_sh_scipy(degree, d), atol=1e-12)


def test_errors_and_clamp():
    with pytest.raises(SHError):
        eval_sh(np.zeros((5, 3)), [0, 0, 1])
    with pytest.raises(SHError):
        eval_sh(np.zeros((1, 3)), [0, 0, 2])
    with pytest.raises(SHError):
        eval_sh(np.zeros(7), [0, 0, 1])
    out = eval_sh_batch(np.full((2, 1, 3), 100.0), np.array([[0, 0, 1.0], [1, 0, 0]]))
    assert np.all(out == 1.0)
    np.testing.assert_allclose(eval_sh(np.zeros(12), [0, 1, 0]), [0.5] * 3)
