import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rumigan import tensor as T
from rumigan.nn import Mlp
from rumigan.tensor import Tape, TapeError, Tensor

from gradcheck import max_rel_error, numeric_grad, weighted

rng = np.random.default_rng(1)
A = rng.normal(size=(3, 4))
B = rng.normal(size=(3, 4))
POS = rng.uniform(0.5, 2.0, size=(3, 4))

# (name, function of tensors, inputs); every public op appears at least once
OP_CASES = [
    ("add", weighted(T.add, (3, 4)), [A, B]),
    ("add_broadcast", weighted(T.add, (3, 4)), [A, B[:1]]),
    ("sub", weighted(T.sub, (3, 4)), [A, B]),
    ("neg", weighted(T.neg, (3, 4)), [A]),
    ("mul", weighted(T.mul, (3, 4)), [A, B]),
    ("mul_broadcast", weighted(T.mul, (3, 4)), [A, B[:, :1]]),
    ("div", weighted(T.div, (3, 4)), [A, POS]),
    ("matmul", weighted(T.matmul, (3, 3)), [A, B.T.copy()]),
    ("transpose", weighted(T.transpose, (4, 3)), [A]),
    ("reshape", weighted(lambda x: T.reshape(x, (2, 6)), (2, 6)), [A]),
    ("relu", weighted(T.relu, (3, 4)), [A]),
    ("tanh", weighted(T.tanh, (3, 4)), [A]),
    ("sigmoid", weighted(T.sigmoid, (3, 4)), [A]),
    ("softplus", weighted(T.softplus, (3, 4)), [A]),
    ("exp", weighted(T.exp, (3, 4)), [A]),
    ("log", weighted(T.log, (3, 4)), [POS]),
    ("square", weighted(T.square, (3, 4)), [A]),
    ("sqrt", weighted(T.sqrt, (3, 4)), [POS]),
    ("mean_all", lambda x: T.mean(x), [A]),
    ("mean_axis", weighted(lambda x: T.mean(x, axis=0), (4,)), [A]),
    ("sum_keepdims", weighted(lambda x: T.sum(x, axis=1, keepdims=True), (3, 1)), [A]),
    ("norm", weighted(lambda x: T.norm(x, axis=1), (3,)), [A]),
    ("concatenate", weighted(lambda x, y: T.concatenate([x, y], axis=0), (6, 4)), [A, B]),
    ("clip", weighted(lambda x: T.clip(x, -0.5, 0.5), (3, 4)), [A]),
    ("broadcast_to", weighted(lambda x: T.broadcast_to(x, (3, 4)), (3, 4)), [B[:1]]),
    ("sum_to", weighted(lambda x: T.sum_to(x, (1, 4)), (1, 4)), [A]),
    ("index", weighted(lambda x: T.index(x, (slice(0, 2), slice(1, 3))), (2, 2)), [A]),
    ("composite", lambda x, y: T.mean(T.square(T.sub(T.tanh(T.matmul(x, T.transpose(y))), 0.3))), [A, B]),
]


@pytest.mark.parametrize("name,fn,inputs", OP_CASES, ids=[c[0] for c in OP_CASES])
def test_op_gradients_match_finite_differences(name, fn, inputs):
    assert max_rel_error(fn, inputs) <= 1e-5


def test_mean_square_gradient_by_hand():
    tape = Tape()
    with tape:
        x = tape.watch(Tensor([1.0, 2.0, 3.0]))
        y = T.mean(T.square(x))
    (g,) = tape.gradient(y, [x])
    np.testing.assert_allclose(g.data, [2 / 3, 4 / 3, 2.0], rtol=0, atol=1e-15)


def test_double_backward_of_input_gradient_norm():
    # d/dw of ||d/dx tanh(x w)|| vs finite differences of the first-order gradient
    x0 = rng.normal(size=(5, 3))
    w0 = rng.normal(size=(3, 1))

    def penalty(w):
        tape = Tape()
        with tape:
            tape.watch(w)
            x = tape.watch(Tensor(x0))
            out = T.sum(T.tanh(T.matmul(x, w)))
            (gx,) = tape.gradient(out, [x], create_graph=True)
            pen = T.mean(T.square(T.sub(T.norm(gx, axis=1), 1.0)))
        return tape, pen

    w = Tensor(w0)
    tape, pen = penalty(w)
    (gw,) = tape.gradient(pen, [w])
    num = numeric_grad(lambda wt: penalty(wt)[1], [w0], 0)
    assert np.linalg.norm(gw.data - num) / np.linalg.norm(num) <= 1e-4


def test_norm_at_zero_is_finite():
    tape = Tape()
    with tape:
        x = tape.watch(Tensor(np.zeros((2, 3))))
        y = T.sum(T.norm(x, axis=1))
    (g,) = tape.gradient(y, [x])
    assert np.all(np.isfinite(g.data))


def test_untracked_inputs_are_not_recorded():
    tape = Tape()
    with tape:
        a = Tensor(A)
        T.exp(a)
    assert tape.nodes == []


def test_unrelated_wrt_gets_zero_gradient():
    tape = Tape()
    with tape:
        x = tape.watch(Tensor(A))
        z = tape.watch(Tensor(B))
        y = T.sum(x)
    gx, gz = tape.gradient(y, [x, z])
    assert np.all(gx.data == 1.0) and np.all(gz.data == 0.0)


def test_tape_errors():
    tape = Tape()
    with tape:
        x = tape.watch(Tensor(A))
        y = T.exp(x)
    with pytest.raises(TapeError):
        tape.gradient(y, [x])  # non-scalar root
    with pytest.raises(TapeError):
        tape.gradient(T.sum(y), [Tensor(A)])  # untracked input


def test_domain_errors():
    with pytest.raises(ValueError):
        T.log(Tensor([0.0, 1.0]))
    with pytest.raises(ValueError):
        T.sqrt(Tensor([-1.0]))
    with pytest.raises(ZeroDivisionError):
        T.div(Tensor([1.0]), Tensor([0.0]))
    with pytest.raises(ValueError):
        T.matmul(Tensor(A), Tensor(A))
    with pytest.raises(FloatingPointError):
        T.exp(Tensor([1000.0]))


def test_mlp_parameter_gradients():
    net = Mlp([3, 5, 1], np.random.default_rng(0), hidden="tanh", output="sigmoid")
    x = rng.normal(size=(4, 3))
    values = [p.data for p in net.params]

    def f(*ps):
        net.weights = [ps[0], ps[2]]
        net.biases = [ps[1], ps[3]]
        return T.mean(net(x))

    assert max_rel_error(f, values) <= 1e-5


def test_mlp_shape_validation():
    net = Mlp([2, 4, 1], np.random.default_rng(0))
    with pytest.raises(ValueError):
        net(np.zeros((3, 5)))
    with pytest.raises(ValueError):
        Mlp([2], np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.set_params([np.zeros((2, 4))])


small = arrays(np.float64, (2, 3), elements=st.floats(-3, 3))


@settings(max_examples=30, deadline=None)
@given(small, small)
def test_sum_gradient_of_sum_is_ones(a, b):
    tape = Tape()
    with tape:
        x = tape.watch(Tensor(a))
        y = T.sum(T.add(x, b))
    (g,) = tape.gradient(y, [x])
    assert np.array_equal(g.data, np.ones_like(a))


@settings(max_examples=30, deadline=None)
@given(small)
def test_linear_function_gradient_is_exact(a):
    w = np.arange(6.0).reshape(2, 3)
    tape = Tape()
    with tape:
        x = tape.watch(Tensor(a))
        y = T.sum(T.mul(x, w))
    (g,) = tape.gradient(y, [x])
    assert np.array_equal(g.data, w)
