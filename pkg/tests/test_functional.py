import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import naive_conv3d

from gaborseg import _backend
from gaborseg import functional as F
from gaborseg.tensor import Tensor

BACKENDS = [name for name in _backend.AVAILABLE if name != "numba" or _backend.HAS_NUMBA]


@pytest.fixture(params=BACKENDS)
def kern(request):
    return _backend.get_kernels(request.param)


def test_delta_kernel_is_identity(kern):
    x = np.random.default_rng(0).normal(size=(2, 3, 4, 5, 6))
    w = np.zeros((3, 3, 3, 3, 3))
    for c in range(3):
        w[c, c, 1, 1, 1] = 1.0
    out = F.conv3d(x, w, kernels=kern).data
    assert np.array_equal(out, x)


def test_all_ones_valid_on_constant():
    x = np.full((1, 1, 5, 5, 5), 7.0)
    out = F.conv3d(x, np.ones((1, 1, 3, 3, 3)), padding="valid").data
    assert out.shape == (1, 1, 3, 3, 3) and np.all(out == 189.0)


@pytest.mark.parametrize("stride", [1, 2])
@pytest.mark.parametrize("padding", ["same", "valid"])
@pytest.mark.parametrize("k", [1, 3, 5])
def test_conv_matches_naive_oracle(kern, stride, padding, k):
    rng = np.random.default_rng(k * 10 + stride)
    x = rng.normal(size=(2, 2, 6, 5, 7))
    w = rng.normal(size=(3, 2, k, k, k))
    b = rng.normal(size=3)
    got = F.conv3d(x, w, b, stride=stride, padding=padding, kernels=kern).data
    ref = naive_conv3d(x, w, b, stride, padding)
    assert got.shape == ref.shape
    assert np.max(np.abs(got - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_output_extent_rule():
    assert F.conv_output_shape((5, 6, 7), 3, stride=2) == (3, 3, 4)
    assert F.conv_output_shape((5, 6, 7), 3, padding="valid") == (3, 4, 5)


def test_conv_errors():
    x = np.zeros((1, 2, 4, 4, 4))
    with pytest.raises(ValueError, match="channels"):
        F.conv3d(x, np.zeros((1, 3, 3, 3, 3)))
    with pytest.raises(ValueError, match="odd"):
        F.conv3d(x, np.zeros((1, 2, 2, 2, 2)))
    with pytest.raises(ValueError):
        F.conv3d(x, np.zeros((1, 2, 3, 3, 3)), stride=0)


def test_backends_agree_on_gradients():
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=(1, 2, 6, 6, 6))
    w0 = rng.normal(size=(2, 2, 3, 3, 3))
    grads = []
    for name in BACKENDS:
        x = Tensor(x0, requires_grad=True)
        w = Tensor(w0, requires_grad=True)
        (F.conv3d(x, w, stride=2, kernels=_backend.get_kernels(name)) ** 2).sum().backward()
        grads.append((x.grad, w.grad))
    for gx, gw in grads[1:]:
        np.testing.assert_allclose(gx, grads[0][0], rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(gw, grads[0][1], rtol=1e-12, atol=1e-12)


def test_upsample():
    x = np.random.default_rng(0).normal(size=(1, 2, 2, 3, 2))
    assert np.array_equal(F.upsample3d(Tensor(x), 1).data, x)
    v = F.upsample3d(np.full((1, 1, 1, 1, 1), 4.5), 2).data
    assert v.shape == (1, 1, 2, 2, 2) and np.all(v == 4.5)
    for f in (2, 3):
        assert np.isclose(F.upsample3d(x, f).data.sum(), f ** 3 * x.sum())
    with pytest.raises(ValueError):
        F.upsample3d(x, 0)


def test_group_norm_examples():
    one, zero = np.ones(4), np.zeros(4)
    out = F.group_norm(np.full((1, 4, 2, 2, 2), 3.0), 2, one, zero).data
    assert np.all(out == 0.0)
    x = np.ones((1, 4, 2, 2, 2))
    x[:, :2, 0] = -1
    x[:, 2:, :, 0] = -1
    out = F.group_norm(x, 2, one, zero, eps=1e-12).data
    np.testing.assert_allclose(np.abs(out), 1.0, atol=1e-6)
    with pytest.raises(ValueError):
        F.group_norm(x, 3, np.ones(4), zero)


@given(st.integers(0, 10_000), st.floats(1e-1, 10.0))
@settings(max_examples=25, deadline=None)
def test_group_norm_statistics(seed, scale):
    x = np.random.default_rng(seed).normal(size=(2, 8, 3, 3, 3)) * scale + 5.0
    out = F.group_norm(x, 4, np.ones(8), np.zeros(8), eps=1e-10).data.reshape(2, 4, -1)
    assert np.abs(out.mean(axis=2)).max() <= 1e-9
    assert np.abs(out.var(axis=2) - 1.0).max() <= 1e-6


def test_softmax():
    out = F.softmax_channel(np.zeros((1, 4, 2, 2, 2))).data
    assert np.all(out == 0.25)
    z = np.zeros((1, 3, 1, 1, 1))
    z[0, 1] = 50.0
    assert F.softmax_channel(z).data[0, 1, 0, 0, 0] >= 1 - 1e-15
    z = np.random.default_rng(1).normal(size=(2, 5, 3, 3, 3)) * 4
    out = F.softmax_channel(z).data
    ref = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    assert np.max(np.abs(out - ref)) <= 1e-12
    assert np.all(out > 0) and np.max(np.abs(out.sum(axis=1) - 1)) <= 1e-12


def test_spatial_dropout():
    x = np.ones((1, 10_000, 1, 1, 1))
    rng = np.random.default_rng(0)
    assert np.array_equal(F.spatial_dropout(x, 0.0, True, rng).data, x)
    assert np.array_equal(F.spatial_dropout(x, 0.7, False).data, x)
    out = F.spatial_dropout(x, 0.5, True, rng).data
    assert abs(np.mean(out == 0) - 0.5) <= 0.02
    assert abs(out.mean() - 1.0) <= 0.02
    assert set(np.unique(out)) <= {0.0, 2.0}
    with pytest.raises(ValueError):
        F.spatial_dropout(x, 1.0, True, rng)
    with pytest.raises(ValueError, match="Generator"):
        F.spatial_dropout(x, 0.5, True, None)
