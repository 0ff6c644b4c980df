import numpy as np
import pytest

from mfwlab.autodiff import Tape, finite_diff_grad


def test_affine_identity():
    tape = Tape()
    x = tape.leaf(np.arange(6.0).reshape(2, 3))
    W = tape.leaf(np.eye(3))
    b = tape.leaf(np.zeros(3))
    y = tape.affine(x, W, b)
    assert np.array_equal(y.value, x.value)


def test_affine_zero_input_broadcasts_bias():
    tape = Tape()
    x = tape.leaf(np.zeros((4, 3)))
    W = tape.leaf(np.ones((3, 2)))
    b = tape.leaf(np.array([1.0, -2.0]))
    y = tape.affine(x, W, b)
    assert np.array_equal(y.value, np.tile([1.0, -2.0], (4, 1)))


def test_affine_shape_error_names_shapes():
    tape = Tape()
    x = tape.leaf(np.zeros((2, 3)))
    W = tape.leaf(np.zeros((4, 2)))
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 2\)"):
        tape.affine(x, W)


def test_affine_gradients_match_finite_differences():
    gen = np.random.default_rng(0)
    x0, W0, b0 = gen.normal(size=(3, 4)), gen.normal(size=(4, 2)), gen.normal(size=2)
    labels = np.array([0, 1, 0])

    def loss_of(xv, Wv, bv) -> float:
        tape = Tape()
        y = tape.affine(tape.leaf(xv), tape.leaf(Wv), tape.leaf(bv))
        return float(tape.softmax_xent(y, labels, np.ones(3)).value)

    tape = Tape()
    x, W, b = tape.leaf(x0), tape.leaf(W0), tape.leaf(b0)
    loss = tape.softmax_xent(tape.affine(x, W, b), labels, np.ones(3))
    adj = tape.backward(loss)
    for leaf, v0, fd_f in [
        (x, x0, lambda v: loss_of(v, W0, b0)),
        (W, W0, lambda v: loss_of(x0, v, b0)),
        (b, b0, lambda v: loss_of(x0, W0, v)),
    ]:
        fd = finite_diff_grad(fd_f, v0.copy())
        rel = np.abs(adj[leaf.idx] - fd).max() / max(np.abs(fd).max(), 1e-12)
        assert rel <= 1e-6


def test_relu_regions():
    tape = Tape()
    x = tape.leaf(np.array([[-1.0, -2.0]]))
    y = tape.relu(x)
    assert np.array_equal(y.value, [[0.0, 0.0]])
    xp = tape.leaf(np.array([[1.0, 2.0]]))
    yp = tape.relu(xp)
    assert np.array_equal(yp.value, [[1.0, 2.0]])


def test_convex_mix_cases():
    tape = Tape()
    z1 = tape.leaf(np.array([[1.0, 0.0]]))
    z2 = tape.leaf(np.array([[0.0, 1.0]]))
    assert np.array_equal(tape.convex_mix(z1, z2, 0.0).value, z1.value)
    assert np.allclose(tape.convex_mix(z1, z2, 0.25).value, [[0.75, 0.25]])
    same = tape.convex_mix(z1, tape.leaf(z1.value.copy()), 0.5)
    assert np.allclose(same.value, z1.value)
    with pytest.raises(ValueError):
        tape.convex_mix(z1, tape.leaf(np.zeros((2, 2))), 0.5)


def test_convex_mix_adjoint_split():
    lam = 0.3
    tape = Tape()
    z1 = tape.leaf(np.random.default_rng(1).normal(size=(2, 3)))
    z2 = tape.leaf(np.random.default_rng(2).normal(size=(2, 3)))
    mixed = tape.convex_mix(z1, z2, lam)
    loss = tape.softmax_xent(mixed, np.array([0, 1]), np.ones(2))
    adj = tape.backward(loss)
    a = adj[mixed.idx]
    assert np.allclose(np.linalg.norm(adj[z1.idx]), (1 - lam) * np.linalg.norm(a))
    assert np.allclose(np.linalg.norm(adj[z2.idx]), lam * np.linalg.norm(a))


def test_softmax_xent_uniform():
    tape = Tape()
    logits = tape.leaf(np.zeros((1, 2)))
    loss = tape.softmax_xent(logits, np.array([0]), np.ones(1))
    assert np.isclose(float(loss.value), np.log(2))


def test_softmax_xent_confident_correct_limit():
    tape = Tape()
    logits = tape.leaf(np.array([[100.0, 0.0, 0.0]]))
    loss = tape.softmax_xent(logits, np.array([0]), np.ones(1))
    assert float(loss.value) < 1e-10


def test_softmax_xent_gradient_form():
    gen = np.random.default_rng(3)
    lv = gen.normal(size=(4, 5))
    labels = gen.integers(0, 5, size=4)
    w = gen.uniform(0.5, 2.0, size=4)
    tape = Tape()
    logits = tape.leaf(lv)
    loss = tape.softmax_xent(logits, labels, w)
    adj = tape.backward(loss)
    shifted = lv - lv.max(axis=1, keepdims=True)
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    onehot = np.eye(5)[labels]
    expected = (probs - onehot) * (w / w.sum())[:, None]
    assert np.allclose(adj[logits.idx], expected, rtol=1e-12)

    def f(v):
        t2 = Tape()
        return float(t2.softmax_xent(t2.leaf(v), labels, w).value)

    fd = finite_diff_grad(f, lv.copy())
    rel = np.abs(adj[logits.idx] - fd).max() / np.abs(fd).max()
    assert rel <= 1e-6


def test_softmax_xent_errors():
    tape = Tape()
    logits = tape.leaf(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        tape.softmax_xent(logits, np.array([0, 3]), np.ones(2))
    with pytest.raises(ValueError):
        tape.softmax_xent(logits, np.array([0, 1]), np.zeros(2))


def test_backward_constant_zero_grads():
    tape = Tape()
    x = tape.leaf(np.ones((2, 2)))
    c = tape.leaf(np.array(3.0))
    adj = tape.backward(c)
    assert np.array_equal(adj[x.idx], np.zeros((2, 2)))


def test_backward_requires_scalar():
    tape = Tape()
    x = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ValueError):
        tape.backward(x)


def test_backward_single_affine_hand_gradient():
    # binary logistic head on one sample: d loss / d w = (sigma(w.x) - y) x
    gen = np.random.default_rng(4)
    xv = gen.normal(size=(1, 3))
    wv = gen.normal(size=(3, 2))
    wv[:, 0] = 0.0
    tape = Tape()
    W = tape.leaf(wv)
    logits = tape.affine(tape.leaf(xv), W)
    loss = tape.softmax_xent(logits, np.array([1]), np.ones(1))
    adj = tape.backward(loss)
    sigma = 1.0 / (1.0 + np.exp(-(xv[0] @ wv[:, 1])))
    expected_col1 = (sigma - 1.0) * xv[0]
    assert np.allclose(adj[W.idx][:, 1], expected_col1, rtol=1e-12)


def test_backward_linearity():
    gen = np.random.default_rng(5)
    lv = gen.normal(size=(3, 4))
    labels = np.array([0, 1, 2])

    def grad_of(weights):
        tape = Tape()
        logits = tape.leaf(lv)
        loss = tape.softmax_xent(logits, labels, weights)
        return tape.backward(loss)[logits.idx] * weights.sum()

    w1 = np.array([1.0, 0.0, 0.0])
    w2 = np.array([0.0, 1.0, 2.0])
    a, b = 2.5, -0.5
    g1, g2 = grad_of(w1), grad_of(w2)
    # a*loss1 + b*loss2 differentiates to a*grad1 + b*grad2
    tape = Tape()
    logits = tape.leaf(lv)
    l1 = tape.softmax_xent(logits, labels, w1)
    l2 = tape.softmax_xent(logits, labels, w2)
    total = tape.add(tape.scale(l1, a * w1.sum()), tape.scale(l2, b * w2.sum()))
    adj = tape.backward(total)
    assert np.allclose(adj[logits.idx], a * g1 + b * g2, atol=1e-12)


def test_finite_diff_exact_for_quadratics():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    theta = np.array([0.7, -1.2])
    grad = finite_diff_grad(lambda t: float(t @ A @ t), theta.copy())
    assert np.allclose(grad, (A + A.T) @ theta, atol=1e-8)


def test_finite_diff_exact_for_linear():
    c = np.array([1.0, -2.0, 3.0])
    grad = finite_diff_grad(lambda t: float(c @ t), np.zeros(3))
    assert np.allclose(grad, c, atol=1e-10)


def test_finite_diff_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_diff_grad(lambda t: 0.0, np.zeros(2), step=0.0)
