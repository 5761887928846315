import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from visuotactile.mvae.losses import (bce_logits, bce_logits_grad, bce_probs, binary_entropy, mse,
                                      squared_error_rows)
from visuotactile.mvae.nn import MLP, dense_backward, sigmoid, softplus, swish, swish_grad


def test_bce_examples():
    assert bce_logits([0.0], [1.0]) == pytest.approx(np.log(2))
    assert bce_logits([0.0, 0.0], [0.0, 1.0]) == pytest.approx(np.log(2))
    assert bce_probs([0.5], [1.0]) == pytest.approx(np.log(2))
    assert binary_entropy([0.5, 0.0, 1.0]) == pytest.approx(np.log(2) / 3)
    with pytest.raises(ValueError):
        bce_logits([0.0], [1.5])
    with pytest.raises(ValueError):
        bce_logits([0.0, 1.0], [0.5])


def test_bce_stable_for_huge_logits():
    v = bce_logits([800.0, -800.0], [1.0, 0.0])
    assert np.isfinite(v) and v == pytest.approx(0.0)
    assert bce_logits([800.0], [0.0]) == pytest.approx(800.0)


@given(arrays(np.float64, 6, elements=st.floats(-30, 30)), arrays(np.float64, 6, elements=st.floats(0, 1)))
def test_bce_at_least_entropy(logits, targets):
    assert bce_logits(logits, targets) >= binary_entropy(targets) - 1e-12


@given(arrays(np.float64, 6, elements=st.floats(-10, 10)), arrays(np.float64, 6, elements=st.floats(0, 1)))
def test_bce_logits_agrees_with_probability_form(logits, targets):
    # the probability form loses digits in 1 - sigmoid(l), hence the moderate range
    assert bce_logits(logits, targets) == pytest.approx(bce_probs(sigmoid(logits), targets, 1e-300),
                                                        rel=1e-9, abs=1e-9)


def test_bce_grad_is_sigmoid_minus_target():
    l = np.array([0.3, -1.2, 2.0])
    y = np.array([0.1, 0.9, 0.5])
    h = 1e-6
    num = [(bce_logits(l + h * e, y) - bce_logits(l - h * e, y)) * 3 / (2 * h) for e in np.eye(3)]
    assert np.allclose(bce_logits_grad(l, y), num, atol=1e-8)


def test_squared_error():
    assert squared_error_rows(np.array([[1.0, 2.0]]), np.array([[0.0, 0.0]])).tolist() == [5.0]
    assert mse([1.0, 3.0], [1.0, 1.0]) == 2.0


def test_activation_identities():
    x = np.linspace(-50, 50, 101)
    assert np.allclose(sigmoid(x) + sigmoid(-x), 1.0)
    assert np.allclose(softplus(x) - softplus(-x), x)
    assert swish(0.0) == 0.0
    h = 1e-6
    xs = np.linspace(-5, 5, 21)
    assert np.allclose(swish_grad(xs), (swish(xs + h) - swish(xs - h)) / (2 * h), atol=1e-8)


def test_dense_weight_gradient_is_outer_product():
    x = np.array([[1.0, 2.0]])
    w = np.zeros((2, 3))
    gy = np.array([[3.0, -1.0, 0.5]])
    gx, gw, gb = dense_backward(x, w, gy)
    assert np.array_equal(gw, np.outer(x[0], gy[0]))
    assert np.array_equal(gb, gy[0])
    assert np.array_equal(gx, gy @ w.T)


def test_mlp_init_and_backward():
    net = MLP("enc.x", (400, 300, 4))
    p = net.init(np.random.default_rng(0))
    assert list(net.keys()) == ["enc.x.W0", "enc.x.b0", "enc.x.W1", "enc.x.b1"]
    assert np.var(p["enc.x.W0"]) == pytest.approx(1 / 400, rel=0.05)
    assert not p["enc.x.b0"].any()
    small = MLP("m", (3, 4, 2))
    p = small.init(np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(5, 3))
    gy = np.random.default_rng(3).normal(size=(5, 2))
    y, cache = small.forward(p, x)
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    gx = small.backward(p, cache, gy, grads)
    h = 1e-6
    for key in p:
        for idx in np.ndindex(p[key].shape):
            old = p[key][idx]
            p[key][idx] = old + h
            up = float((small.forward(p, x)[0] * gy).sum())
            p[key][idx] = old - h
            dn = float((small.forward(p, x)[0] * gy).sum())
            p[key][idx] = old
            assert grads[key][idx] == pytest.approx((up - dn) / (2 * h), rel=1e-5, abs=1e-8)
    xp = x.copy()
    xp[0, 0] += h
    xm = x.copy()
    xm[0, 0] -= h
    num = (float((small.forward(p, xp)[0] * gy).sum()) - float((small.forward(p, xm)[0] * gy).sum())) / (2 * h)
    assert gx[0, 0] == pytest.approx(num, rel=1e-5)
