"""Tensor primitives: frozen values, gradient rules, shape policing."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dove import autograd as ag
from dove.autograd import DegenerateVectorError, DimensionError, Tensor
from dove.checks import primitive_gradcheck


def _param(values):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)


# ----------------------------------------------------------- frozen examples

def test_matmul_identity():
    out = ag.matmul(_param(np.eye(2)), _param([[1.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(out.data, [[1.0, 2.0], [3.0, 4.0]])


def test_matmul_hand_value():
    out = ag.matmul(_param([[1.0, 2.0]]), _param([[3.0], [4.0]]))
    assert np.array_equal(out.data, [[11.0]])


def test_matmul_hand_gradients():
    a = _param([[1.0, 2.0]])
    b = _param([[3.0], [4.0]])
    ag.reduce_sum(ag.matmul(a, b)).backward()
    assert np.allclose(a.grad, [[3.0, 4.0]], atol=1e-12)
    assert np.allclose(b.grad, [[1.0], [2.0]], atol=1e-12)


def test_activation_values():
    assert ag.sigmoid(_param([0.0])).data[0] == 0.5
    assert abs(ag.sigmoid(_param([math.log(3.0)])).data[0] - 0.75) < 1e-12
    assert ag.tanh(_param([0.0])).data[0] == 0.0
    assert np.array_equal(ag.relu(_param([-2.0, 3.0])).data, [0.0, 3.0])


def test_softmax_hand_values():
    row = ag.softmax_rows(_param([[0.0, math.log(3.0)]]))
    assert np.allclose(row.data, [[0.25, 0.75]], atol=1e-12)
    uniform = ag.softmax_rows(_param([[7.0, 7.0, 7.0]]))
    assert np.allclose(uniform.data, [[1 / 3, 1 / 3, 1 / 3]], atol=1e-12)


def test_elementwise_values():
    assert np.array_equal(ag.add(_param([1.0, 2.0]), _param([3.0, 4.0])).data,
                          [4.0, 6.0])
    a = np.array([[0.5, -1.5], [2.0, 0.0]])
    assert np.array_equal(ag.mul(_param(a), _param(np.ones((2, 2)))).data, a)


def test_mean_rows_hand_values():
    out = ag.mean_rows(_param([[1.0, 3.0], [3.0, 5.0]]))
    assert np.allclose(out.data, [2.0, 4.0], atol=1e-12)
    r = np.array([0.25, -1.0, 2.0])
    same = ag.mean_rows(_param(np.stack([r, r, r, r])))
    assert np.allclose(same.data, r, atol=1e-12)


def test_concat_rows_shapes():
    out = ag.concat_rows(_param(np.zeros((4, 5))), _param(np.ones((3, 5))))
    assert out.data.shape == (7, 5)
    with pytest.raises(DimensionError):
        ag.concat_rows(_param(np.zeros((2, 3))), _param(np.zeros((2, 4))))


# ------------------------------------------------------------- construction

def test_constructor_rejects_bad_input():
    with pytest.raises(ValueError):
        Tensor(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        Tensor(np.array([np.inf, 1.0]))
    with pytest.raises(DimensionError):
        Tensor(np.zeros((2, 2, 2, 2)))
    # rank-0 input is promoted to a one-element vector, not rejected
    assert Tensor(np.float64(3.0)).data.shape == (1,)


def test_normalize_rows_rejects_zero_row():
    with pytest.raises(DegenerateVectorError):
        ag.normalize_rows(_param([[1.0, 2.0], [0.0, 0.0]]))


# ------------------------------------------------------- gradient verification

def test_grad_check_closed_form_square():
    w = _param([3.0])

    def loss():
        return ag.mul(w, w)

    err = ag.grad_check(loss, {"w": w})
    assert err < 1e-8
    w.grad[:] = 0.0  # grad_check leaves its own analytic pass behind
    loss().backward()
    assert abs(w.grad[0] - 6.0) < 1e-9


def test_grad_check_constant_function():
    w = _param([2.0])
    c = ag.constant(np.array([5.0]))
    err = ag.grad_check(lambda: ag.mul(c, c), {"w": w})
    assert err < 1e-10


def test_grad_check_rejects_nonfinite_loss():
    w = _param([1e308])
    with np.errstate(all="ignore"), pytest.raises(ValueError):
        ag.grad_check(lambda: ag.mul(w, w), {"w": w})


def test_every_primitive_matches_finite_differences():
    # random inputs in [-1, 1], shapes at most 4x8, per-op sweep
    assert primitive_gradcheck(seed=0) < 1e-6
    assert primitive_gradcheck(seed=3) < 1e-6


def test_attend_rows_matches_matmul():
    rng = np.random.default_rng(5)
    s = rng.uniform(-1, 1, (3, 6))
    f = rng.uniform(-1, 1, (6, 4))
    out = ag.attend_rows(_param(s), _param(f))
    assert np.allclose(out.data, s @ f, atol=1e-12)


# ------------------------------------------------------------ property tests

finite_rows = st.lists(
    st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False),
             min_size=3, max_size=3),
    min_size=1, max_size=4)


@settings(max_examples=60, deadline=None)
@given(finite_rows)
def test_softmax_rows_sum_to_one(rows):
    out = ag.softmax_rows(_param(rows))
    assert np.all(out.data >= 0.0)
    assert np.allclose(out.data.sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(finite_rows, st.floats(min_value=-30, max_value=30, allow_nan=False))
def test_softmax_rows_shift_invariance(rows, c):
    base = ag.softmax_rows(_param(rows)).data
    shifted = ag.softmax_rows(_param(np.asarray(rows) + c)).data
    assert np.allclose(base, shifted, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_mul_gradient_is_other_factor(seed):
    rng = np.random.default_rng(seed)
    a = _param(rng.uniform(-1, 1, (3, 4)))
    b = _param(rng.uniform(-1, 1, (3, 4)))
    ag.reduce_sum(ag.mul(a, b)).backward()
    assert np.allclose(a.grad, b.data, atol=1e-12)
    assert np.allclose(b.grad, a.data, atol=1e-12)


def test_bounded_ops_stay_finite():
    x = _param([[700.0, -700.0, 50.0]])
    for op in (ag.sigmoid, ag.tanh, ag.softmax_rows):
        assert np.all(np.isfinite(op(x).data))


def test_gradients_accumulate_across_uses():
    w = _param([2.0])
    # w used twice: d(w*w + w*w)/dw = 4w = 8
    ag.add(ag.mul(w, w), ag.mul(w, w)).backward()
    assert abs(w.grad[0] - 8.0) < 1e-12
