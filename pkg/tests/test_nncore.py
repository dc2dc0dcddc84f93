import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intentlab.errors import (
    CheckpointNotFound, InvalidConfig, NonFiniteLoss, ShapeMismatch, ZeroVector,
)
from intentlab.nncore import engine as E
from intentlab.nncore import checkpoint
from intentlab.nncore.engine import Value, backward
from intentlab.nncore.model import ModelParams, encode, order_logit, perm_logits, project
from intentlab.nncore.optim import OptimState, opt_step
from oracles import layers_of, mlp, numeric_grads, rel_err

from conftest import TINY

# name -> (input shapes, graph builder, positive inputs?)
OPS = {
    "add_broadcast": ([(3, 4), (4,)], lambda a, b: a + b, False),
    "sub": ([(3, 4), (3, 4)], lambda a, b: a - b, False),
    "mul_broadcast": ([(3, 4), (3, 1)], lambda a, b: a * b, False),
    "div": ([(2, 3), (2, 3)], lambda a, b: a / b, True),
    "rdiv": ([(2, 3)], lambda a: 2.0 / a, True),
    "pow": ([(5,)], lambda a: a ** 3, False),
    "matmul": ([(3, 4), (4, 2)], lambda a, b: a @ b, False),
    "tanh": ([(4, 3)], E.tanh, False),
    "exp": ([(4,)], E.exp, False),
    "log": ([(4,)], E.log, True),
    "sqrt": ([(4,)], E.sqrt, True),
    "sum_axis": ([(3, 4)], lambda a: a.sum(axis=0), False),
    "sum_keepdims": ([(3, 4)], lambda a: a.sum(axis=1, keepdims=True), False),
    "mean": ([(3, 4)], lambda a: a.mean(axis=1), False),
    "transpose": ([(2, 5)], lambda a: a.T, False),
    "reshape": ([(2, 6)], lambda a: a.reshape(3, 4), False),
    "index_rows": ([(5, 3)], lambda a: a[np.array([0, 2, 2, 4])], False),
    "slice": ([(5, 3)], lambda a: a[1:4, :2], False),
    "take": ([(5, 2)], lambda a: E.take(a, np.array([1, 1, 3])), False),
    "concat": ([(2, 3), (4, 3)], lambda a, b: E.concat([a, b], axis=0), False),
    "concat_cols": ([(2, 3), (2, 1)], lambda a, b: E.concat([a, b], axis=1), False),
    "logsumexp": ([(3, 5)], lambda a: E.logsumexp(a * 10.0, axis=1), False),
    "l2_normalize": ([(3, 4)], E.l2_normalize, False),
    "neg": ([(3,)], lambda a: -a, False),
}


def _inputs(shapes, rng, positive):
    return [rng.uniform(0.5, 2.0, s) if positive else rng.normal(size=s) for s in shapes]


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients(name):
    shapes, build, positive = OPS[name]
    rng = np.random.default_rng(abs(hash(name)) % 2**32)
    xs = _inputs(shapes, rng, positive)
    out_shape = build(*[Value(x) for x in xs]).shape
    weights = rng.normal(size=out_shape)

    def loss(arrays):
        return float((build(*[Value(arrays[i]) for i in range(len(xs))]).value * weights).sum())

    leaves = [Value(x) for x in xs]
    backward((build(*leaves) * weights).sum())
    numeric = numeric_grads(loss, dict(enumerate(xs)))
    for i, leaf in enumerate(leaves):
        assert rel_err(leaf.grad, numeric[i]) < 1e-4


def test_loss_gradients_bce_and_ce():
    rng = np.random.default_rng(3)
    z = rng.normal(size=6)
    y = (rng.random(6) < 0.5).astype(float)
    leaf = Value(z)
    backward(E.binary_cross_entropy_with_logits(leaf, y))
    num = numeric_grads(lambda a: float(E.binary_cross_entropy_with_logits(Value(a["z"]), y).value), {"z": z})
    assert rel_err(leaf.grad, num["z"]) < 1e-4

    logits = rng.normal(size=(4, 6))
    labels = rng.integers(6, size=4)
    leaf = Value(logits)
    backward(E.cross_entropy(leaf, labels))
    num = numeric_grads(lambda a: float(E.cross_entropy(Value(a["x"]), labels).value), {"x": logits})
    assert rel_err(leaf.grad, num["x"]) < 1e-4


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_random_composite_graph(seed, rows, cols):
    rng = np.random.default_rng(seed)
    a0, b0, c0 = rng.normal(size=(rows, cols)), rng.normal(size=(cols, 3)), rng.normal(size=3)

    def build(a, b, c):
        h = E.tanh(a @ b + c)
        u = E.l2_normalize(E.concat([h, E.exp(h * 0.5)], axis=1))
        return E.logsumexp(u * 3.0, axis=1).sum() + (a * a).mean() - E.log(1.0 + c * c).sum()

    leaves = [Value(a0), Value(b0), Value(c0)]
    backward(build(*leaves))
    num = numeric_grads(lambda d: float(build(Value(d[0]), Value(d[1]), Value(d[2])).value), {0: a0, 1: b0, 2: c0})
    for i, leaf in enumerate(leaves):
        assert rel_err(leaf.grad, num[i]) < 1e-4


def test_backward_trivial_cases():
    leaves = [Value(np.array([1.0, 2.0])), Value(np.array([[3.0]]))]
    backward(leaves[0].sum() + leaves[1].sum())
    assert np.array_equal(leaves[0].grad, [1.0, 1.0]) and np.array_equal(leaves[1].grad, [[1.0]])

    p = Value(np.array([1.0, -2.0]))
    backward((p * 0.0 + 5.0 - p * 0.0).sum())
    assert np.array_equal(p.grad, [0.0, 0.0])


def test_backward_idempotent_after_zeroing():
    rng = np.random.default_rng(0)
    x = Value(rng.normal(size=(3, 3)))
    loss = (E.tanh(x @ x) ** 2).sum()
    backward(loss)
    first = x.grad.copy()
    x.zero_grad()
    backward(loss)
    assert np.array_equal(first, x.grad)
    backward(loss)
    assert np.allclose(x.grad, 2 * first)


def test_backward_errors():
    with pytest.raises(NonFiniteLoss), np.errstate(divide="ignore"):
        backward(E.log(Value(np.array(0.0))))
    with pytest.raises(ShapeMismatch):
        backward(Value(np.ones(3)))
    with pytest.raises(ShapeMismatch):
        Value(np.ones((2, 3))) @ Value(np.ones((2, 3)))
    with pytest.raises(ShapeMismatch):
        Value(np.ones((2, 3))) @ Value(np.ones(3))
    with pytest.raises(ZeroVector):
        E.l2_normalize(Value(np.zeros((1, 3))))


def test_logsumexp_is_shifted():
    x = Value(np.array([[1000.0, 999.0], [-1000.0, -1001.0]]))
    out = E.logsumexp(x, axis=1).value
    assert np.allclose(out, [1000 + np.log1p(np.exp(-1)), -1000 + np.log1p(np.exp(-1))])


def test_clamped_losses_stay_finite():
    big = Value(np.array([800.0, -800.0]))
    loss = E.binary_cross_entropy_with_logits(big, [1.0, 0.0])
    assert 0 <= float(loss.value) < 1e-11
    loss = E.binary_cross_entropy_with_logits(Value(np.array([800.0])), [0.0])
    assert float(loss.value) == pytest.approx(-np.log(1e-12))
    ce = E.cross_entropy(Value(np.array([[0.0, 900.0]])), [0])
    assert float(ce.value) == pytest.approx(-np.log(1e-12))


# ---------------------------------------------------------------------------
# model


def test_zero_params_give_zero_outputs():
    p = ModelParams.zeros(TINY)
    x = np.random.default_rng(0).normal(size=(5, TINY.d_in))
    assert np.array_equal(encode(p, x).value, np.zeros((5, TINY.d_f)))
    z = project(p, np.ones(TINY.d_f)).value
    assert z.shape == (TINY.d_z,) and not z.any()
    logit = order_logit(p, np.ones(TINY.d_f), np.zeros(TINY.d_f)).value
    assert float(logit) == 0.0 and float(E.sigmoid(logit)) == 0.5
    assert np.array_equal(perm_logits(p, *np.ones((3, TINY.d_f))).value, np.zeros(6))


def test_identical_rows_identical_outputs():
    p = ModelParams.init(TINY, np.random.default_rng(1))
    x = np.tile(np.random.default_rng(2).normal(size=TINY.d_in), (4, 1))
    f = encode(p, x).value
    assert np.all(f == f[0])


def test_forward_matches_reference_mlp():
    p = ModelParams.init(TINY, np.random.default_rng(4))
    p = p.with_arrays({n: a + 0.1 for n, a in p.arrays.items() if ".b" in n})
    x = np.random.default_rng(5).normal(size=(3, TINY.d_in))
    f = mlp(x, layers_of(p.arrays, "enc", 3))
    assert np.allclose(encode(p, x).value, f, atol=1e-12)
    assert np.allclose(project(p, f).value, mlp(f, layers_of(p.arrays, "proj", 2)), atol=1e-12)
    pair = np.concatenate([f[0], f[1]])
    assert np.allclose(order_logit(p, f[0], f[1]).value, mlp(pair, layers_of(p.arrays, "order", 2))[0], atol=1e-12)
    assert np.allclose(perm_logits(p, f[0], f[1], f[2]).value, mlp(f.ravel(), layers_of(p.arrays, "perm", 2)), atol=1e-12)


def test_order_logit_not_antisymmetric():
    p = ModelParams.init(TINY, np.random.default_rng(6))
    f1, f2 = np.random.default_rng(7).normal(size=(2, TINY.d_f))
    a, b = float(order_logit(p, f1, f2).value), float(order_logit(p, f2, f1).value)
    assert abs(a + b) > 1e-6


def test_shape_errors():
    p = ModelParams.init(TINY, np.random.default_rng(0))
    with pytest.raises(ShapeMismatch):
        encode(p, np.ones(TINY.d_in + 1))
    with pytest.raises(ShapeMismatch):
        order_logit(p, np.ones((2, TINY.d_f)), np.ones((3, TINY.d_f)))
    with pytest.raises(ShapeMismatch):
        ModelParams(TINY, {**p.arrays, "enc.b1": np.ones(2)})


@pytest.mark.parametrize("head", ["encode", "project", "order", "perm"])
def test_head_gradients(head):
    rng = np.random.default_rng(["encode", "project", "order", "perm"].index(head))
    p = ModelParams.init(TINY, rng, tau=0.5)
    p = p.with_arrays({n: a + rng.normal(size=a.shape) * 0.1 for n, a in p.arrays.items() if ".b" in n})
    x = rng.normal(size=(3, TINY.d_in))
    f = rng.normal(size=(3, TINY.d_f))
    w = rng.normal(size=8)

    def graph(params, xin):
        if head == "encode":
            out = encode(params, xin)
        elif head == "project":
            out = project(params, xin)
        elif head == "order":
            out = order_logit(params, xin[:2], xin[1:])
        else:
            out = perm_logits(params, xin[0], xin[1], xin[2])
        return (out * w[: out.shape[-1]] if out.ndim else out * w[0]).sum()

    xin = x if head == "encode" else f
    prefix = {"encode": "enc.", "project": "proj.", "order": "order.", "perm": "perm."}[head]
    names = [n for n in p.arrays if n.startswith(prefix)]
    leaves = p.leaves()
    xleaf = Value(xin)
    backward(graph(leaves, xleaf))

    def loss(arrays):
        return float(graph(ModelParams(TINY, {k: v for k, v in arrays.items() if k != "x"}, p.tau),
                           arrays["x"]).value)

    num = numeric_grads(loss, {**p.arrays, "x": xin}, names + ["x"])
    for n in names:
        assert rel_err(leaves[n].grad, num[n]) < 1e-4, n
    assert rel_err(xleaf.grad, num["x"]) < 1e-4


# ---------------------------------------------------------------------------
# optimizer


def test_zero_grads_leave_params():
    w = {"a": np.array([1.0, 2.0])}
    for kind in ("sgd", "adam"):
        out = opt_step(OptimState(lr=0.1, kind=kind), w, {"a": np.zeros(2)})
        assert np.array_equal(out["a"], w["a"])


def test_square_descent_step():
    w = np.array(1.0)
    leaf = Value(w)
    backward(leaf * leaf)
    out = opt_step(OptimState(lr=0.1), {"w": w}, {"w": leaf.grad})
    assert float(out["w"]) == pytest.approx(0.8, abs=1e-15)


def test_optimizer_errors():
    with pytest.raises(InvalidConfig):
        OptimState(lr=0.0)
    with pytest.raises(InvalidConfig):
        OptimState(lr=0.1, kind="rmsprop")
    with pytest.raises(ShapeMismatch):
        opt_step(OptimState(lr=0.1), {"a": np.ones(2)}, {"a": np.ones(3)})


def test_per_name_learning_rates():
    out = opt_step(OptimState(lr=1.0), {"a": np.ones(1), "b": np.ones(1)},
                   {"a": np.ones(1), "b": np.ones(1)}, {"b": 0.5})
    assert out["a"][0] == 0.0 and out["b"][0] == 0.5


@pytest.mark.parametrize("kind,lr", [("sgd", 0.01), ("adam", 0.001)])
def test_convex_probe_non_increasing(kind, lr):
    rng = np.random.default_rng(8)
    x = rng.normal(size=(40, 5))
    y = rng.integers(3, size=40)
    arrays = {"w": np.zeros((5, 3)), "b": np.zeros(3)}
    opt = OptimState(lr=lr, kind=kind)
    losses = []
    for _ in range(100):
        w, b = Value(arrays["w"]), Value(arrays["b"])
        loss = E.cross_entropy(Value(x) @ w + b, y)
        backward(loss)
        losses.append(float(loss.value))
        arrays = opt_step(opt, arrays, {"w": w.grad, "b": b.grad})
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip(tmp_path):
    p = ModelParams.init(TINY, np.random.default_rng(3), tau=0.07)
    path = tmp_path / "ck.bin"
    checkpoint.save(path, p, {"seed": 3, "config_digest": "abc"})
    q, meta = checkpoint.load(path)
    assert q.checksum() == p.checksum() and q.tau == 0.07 and q.dims == TINY
    assert meta["seed"] == 3 and meta["config_digest"] == "abc"
    assert checkpoint.dumps(q, {"seed": 3, "config_digest": "abc"}) == path.read_bytes()


def test_checkpoint_layout():
    p = ModelParams.init(TINY, np.random.default_rng(3))
    data = checkpoint.dumps(p)
    assert data[:4] == b"ILCK"
    version, meta_len = struct.unpack_from("<HI", data, 4)
    assert version == 1
    n_values = sum(a.size for a in p.arrays.values())
    tail = np.frombuffer(data[-8 * n_values:], dtype="<f8")
    assert np.array_equal(tail, np.concatenate([a.ravel() for a in p.arrays.values()]))


def test_checkpoint_errors(tmp_path):
    with pytest.raises(CheckpointNotFound):
        checkpoint.load(tmp_path / "missing.bin")
    with pytest.raises(InvalidConfig):
        checkpoint.loads(b"NOPE" + bytes(20))
    good = checkpoint.dumps(ModelParams.zeros(TINY))
    with pytest.raises(InvalidConfig):
        checkpoint.loads(good + b"\x00")
