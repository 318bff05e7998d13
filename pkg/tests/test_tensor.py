import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from gaborseg.tensor import Tensor, concat, finite_diff_grad, is_grad_enabled, no_grad, stack

arrays = hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=3, max_side=4),
                    elements=st.floats(-2, 2))


def test_sum_of_squares_grad_is_exact():
    x = Tensor(np.array([1.5, -2.0, 0.25]), requires_grad=True)
    (x * x).sum().backward()
    assert np.array_equal(x.grad, 2 * x.data)


def test_unused_leaf_gets_zero_grad():
    x = Tensor(np.ones(3), requires_grad=True)
    y = Tensor(np.ones(3), requires_grad=True)
    ((x * 2.0).sum() + (y * 0.0).sum()).backward()
    assert np.array_equal(y.grad, np.zeros(3))


def test_non_scalar_backward_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        (x * 2.0).backward()


@given(arrays)
@settings(max_examples=30, deadline=None)
def test_double_backward_accumulates_exactly(a):
    x = Tensor(a, requires_grad=True)
    loss = ((x * x).exp() * 0.1 + x.sin()).sum()
    loss.backward()
    once = x.grad.copy()
    loss.backward()
    assert np.array_equal(x.grad, 2 * once)


@given(arrays)
@settings(max_examples=30, deadline=None)
def test_elementwise_chain_matches_finite_differences(a):
    f = lambda t: ((t * t + 1.0).log() * t.cos() + t.softplus() / (t * t + 2.0)).sum()  # noqa: E731
    x = Tensor(a, requires_grad=True)
    f(x).backward()
    num = finite_diff_grad(f, a)
    err = np.abs(x.grad - num) / np.maximum(np.maximum(np.abs(x.grad), np.abs(num)), 1e-6)
    assert err.max() <= 1e-4


def test_broadcasting_gradients_reduce_to_operand_shape():
    a = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    b = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    c = Tensor(np.array([[2.0], [3.0]]), requires_grad=True)
    ((a * b - c) / b).sum().backward()
    assert b.grad.shape == (3,) and c.grad.shape == (2, 1)
    np.testing.assert_allclose(c.grad, -np.sum(1.0 / b.data) * np.ones((2, 1)))


def test_ndarray_on_left_defers_to_tensor():
    x = Tensor(np.ones(2), requires_grad=True)
    y = np.array([3.0, 4.0]) * x
    assert isinstance(y, Tensor)
    y.sum().backward()
    assert np.array_equal(x.grad, [3.0, 4.0])


def test_getitem_concat_stack_gradients():
    x = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True)
    y = concat([x[0:1], x[:, 1:2].transpose(1, 0)], axis=1)
    z = stack([y, y], axis=0)
    z.sum().backward()
    expected = np.zeros((3, 4))
    expected[0] += 2
    expected[:, 1] += 2
    assert np.array_equal(x.grad, expected)


def test_mean_and_reshape():
    x = Tensor(np.arange(6.0), requires_grad=True)
    x.reshape(2, 3).mean(axis=1).sum().backward()
    assert np.allclose(x.grad, 1 / 3)


def test_pow_requires_constant_exponent():
    x = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(TypeError):
        x ** x


def test_no_grad_records_nothing_and_is_thread_local():
    x = Tensor(np.ones(2), requires_grad=True)
    seen = []

    def other():
        seen.append(is_grad_enabled())

    with no_grad():
        y = x * 2.0
        t = threading.Thread(target=other)
        t.start()
        t.join()
    assert not y.requires_grad
    assert seen == [True]
    assert is_grad_enabled()


def test_finite_diff_basics():
    assert np.allclose(finite_diff_grad(lambda t: t.sum(), np.zeros((2, 2))), 1.0)
    g = finite_diff_grad(lambda t: t[0] * t[0], np.array([3.0]))
    assert abs(g[0] - 6.0) <= 1e-8
    with pytest.raises(ValueError):
        finite_diff_grad(lambda t: t.sum(), np.zeros(1), step=0.0)


def test_clamp_and_relu_masks():
    x = Tensor(np.array([-1.0, 0.5, 2.0]), requires_grad=True)
    (x.relu() + x.clamp_min(1.0)).sum().backward()
    assert np.array_equal(x.grad, [0.0, 1.0, 2.0])
