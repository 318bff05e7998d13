"""The numba and numpy kernel modules must agree bit for bit (or to rounding)."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaborseg import _backend
from gaborseg import _kernels_numpy as KN

pytestmark = pytest.mark.skipif(not _backend.HAS_NUMBA, reason="numba not installed")


@pytest.fixture(scope="module")
def KB():
    return _backend.get_kernels("numba")


@given(st.integers(1, 3), st.integers(3, 7), st.sampled_from([1, 3, 5]), st.integers(1, 2),
       st.integers(0, 999))
@settings(max_examples=30, deadline=None)
def test_im2col_col2im_agree(KB, c, side, k, stride, seed):
    if side < k:
        return
    rng = np.random.default_rng(seed)
    xp = rng.normal(size=(c, side, side + 1, side))
    do, ho, wo = [(s - k) // stride + 1 for s in xp.shape[1:]]
    a = KN.im2col(xp, k, stride, do, ho, wo)
    b = KB.im2col(xp, k, stride, do, ho, wo)
    assert np.array_equal(a, b)
    cols = rng.normal(size=a.shape)
    ga = KN.col2im(cols, np.zeros_like(xp), k, stride, do, ho, wo)
    gb = KB.col2im(cols, np.zeros_like(xp), k, stride, do, ho, wo)
    np.testing.assert_allclose(ga, gb, rtol=1e-13, atol=1e-13)
    assert np.array_equal(KN.im2col_hw(xp, k), KB.im2col_hw(xp, k))


def test_col2im_is_adjoint_of_im2col():
    rng = np.random.default_rng(0)
    xp = rng.normal(size=(2, 5, 5, 5))
    k, s = 3, 2
    do = ho = wo = 2
    cols = rng.normal(size=(2 * 27, 8))
    lhs = np.sum(KN.im2col(xp, k, s, do, ho, wo) * cols)
    rhs = np.sum(xp * KN.col2im(cols, np.zeros_like(xp), k, s, do, ho, wo))
    assert np.isclose(lhs, rhs, rtol=1e-12)


@given(st.integers(0, 999))
@settings(max_examples=20, deadline=None)
def test_resampling_kernels_agree(KB, seed):
    rng = np.random.default_rng(seed)
    vol = rng.normal(size=(5, 6, 4))
    labels = rng.integers(0, 4, (5, 6, 4)).astype(np.uint8)
    coords = np.ascontiguousarray(rng.uniform(-1.5, 7.0, (3, 200)))
    np.testing.assert_allclose(KN.trilinear(vol, coords), KB.trilinear(vol, coords),
                               rtol=1e-13, atol=1e-14)
    assert np.array_equal(KN.nearest(labels, coords), KB.nearest(labels, coords))


def test_trilinear_grid_points_and_outside():
    vol = np.arange(24.0).reshape(2, 3, 4)
    q = np.indices(vol.shape, dtype=np.float64).reshape(3, -1)
    for mod in (KN, _backend.get_kernels("numba")):
        assert np.array_equal(mod.trilinear(vol, q), vol.ravel())
        assert mod.trilinear(vol, np.array([[-5.0], [0.0], [0.0]]))[0] == 0.0
        mid = mod.trilinear(vol, np.array([[0.5], [0.0], [0.0]]))[0]
        assert mid == 0.5 * (vol[0, 0, 0] + vol[1, 0, 0])
