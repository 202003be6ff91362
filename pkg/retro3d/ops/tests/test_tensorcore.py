import math

import numpy as np
import pytest
import torch
from scipy.special import erf

from retro3d import ops
from retro3d.ops.gradcheck import numerical_gradient, relative_error

EPS = 1e-4
RTOL = 1e-3

shapes = [(1, 1), (2, 3), (3, 5), (4, 2), (2, 3, 4)]


def randn(*shape, seed=0, requires_grad=True):
    generator = torch.Generator().manual_seed(seed)
    x = torch.randn(*shape, generator=generator, dtype=torch.float64)
    return x.requires_grad_(requires_grad)


def check_gradients(fn, inputs):
    """Analytic gradients of fn(inputs) (a scalar) against central differences."""
    loss = fn(inputs)
    analytic = ops.backward(loss, inputs)
    numeric = numerical_gradient(fn, inputs, eps=EPS)
    for a, n in zip(analytic, numeric):
        assert relative_error(a, n) < RTOL


# ---------------------------------------------------------------------------- #
# Forward examples
# ---------------------------------------------------------------------------- #
def test_matmul_examples():
    eye = torch.eye(2, dtype=torch.float64)
    b = torch.tensor([[2., 3.], [4., 5.]], dtype=torch.float64)
    np.testing.assert_array_equal(ops.matmul(eye, b).numpy(), b.numpy())
    out = ops.matmul(torch.tensor([[1., 2.]], dtype=torch.float64),
                     torch.tensor([[3.], [4.]], dtype=torch.float64))
    assert out.item() == 11.0
    with pytest.raises(ops.DimensionError):
        ops.matmul(torch.zeros(2, 3, dtype=torch.float64), torch.zeros(2, 3, dtype=torch.float64))


def test_matmul_gradient_is_ones_times_b_transposed():
    a = randn(3, 4, seed=1)
    b = randn(4, 2, seed=2)
    grad_a, = ops.backward(ops.sum(ops.matmul(a, b)), [a])
    expected = torch.ones(3, 2, dtype=torch.float64) @ b.detach().t()
    np.testing.assert_allclose(grad_a.numpy(), expected.numpy(), rtol=1e-12)
    check_gradients(lambda t: ops.sum(ops.matmul(t[0], t[1])), [a, b])


def test_softmax_examples():
    out = ops.softmax_lastdim(torch.zeros(3, dtype=torch.float64))
    np.testing.assert_allclose(out.numpy(), [1. / 3] * 3, atol=1e-15)
    out = ops.softmax_lastdim(torch.tensor([1000., 0.], dtype=torch.float64))
    np.testing.assert_allclose(out.numpy(), [1., 0.], atol=1e-12)


@pytest.mark.parametrize('seed', range(5))
def test_softmax_rows_sum_to_one(seed):
    x = randn(4, 7, seed=seed, requires_grad=False) * 10
    y = ops.softmax_lastdim(x)
    assert (y >= 0).all()
    np.testing.assert_allclose(y.sum(-1).numpy(), np.ones(4), atol=1e-12)


def test_gelu_examples():
    assert ops.gelu(torch.zeros(1, dtype=torch.float64)).item() == 0.0
    big = ops.gelu(torch.tensor([30., -30.], dtype=torch.float64))
    assert abs(big[0].item() - 30.0) < 1e-12
    assert abs(big[1].item()) < 1e-12
    expected = 0.5 * (1.0 + erf(1.0 / math.sqrt(2.0)))
    assert abs(ops.gelu(torch.ones(1, dtype=torch.float64)).item() - expected) < 1e-15


def test_cross_entropy_examples():
    vocab = 7
    logits = torch.zeros(3, vocab, dtype=torch.float64)
    loss = ops.cross_entropy(logits, torch.tensor([1, 2, 3]), pad_index=0)
    assert abs(loss.item() - math.log(vocab)) < 1e-12

    logits = torch.full((2, vocab), -50.0, dtype=torch.float64)
    logits[0, 4] = 50.0
    logits[1, 5] = 50.0
    assert ops.cross_entropy(logits, torch.tensor([4, 5]), pad_index=0).item() < 1e-30


def test_cross_entropy_matches_logsumexp():
    logits = randn(4, 7, seed=3, requires_grad=False).numpy()
    targets = np.array([2, 0, 6, 1])
    loss = ops.cross_entropy(torch.from_numpy(logits), torch.from_numpy(targets), pad_index=0)
    expected = []
    for row, t in zip(logits, targets):
        if t == 0:
            continue
        lse = math.log(sum(math.exp(v) for v in row))
        expected.append(lse - row[t])
    assert abs(loss.item() - sum(expected) / len(expected)) < 1e-12


def test_cross_entropy_all_padding_raises():
    with pytest.raises(ValueError):
        ops.cross_entropy(torch.zeros(2, 3, dtype=torch.float64), torch.tensor([0, 0]), pad_index=0)


def test_kl_divergence_examples():
    x = randn(3, 4, seed=4, requires_grad=False)
    assert ops.kl_divergence(x, x.clone()).item() == 0.0
    y = randn(3, 4, seed=5, requires_grad=False)
    assert abs(ops.kl_divergence(x, y).item() - ops.kl_divergence(y, x).item()) < 1e-15

    p = np.array([0.8, 0.2])
    q = np.array([0.3, 0.7])
    expected = 0.5 * (np.sum(p * np.log(p / q)) + np.sum(q * np.log(q / p)))
    loss = ops.kl_divergence(torch.tensor([np.log(p)]), torch.tensor([np.log(q)]))
    assert abs(loss.item() - expected) < 1e-12


def test_kl_divergence_masked_rows():
    x = randn(3, 4, seed=6, requires_grad=False)
    y = randn(3, 4, seed=7, requires_grad=False)
    mask = torch.tensor([True, False, True])
    masked = ops.kl_divergence(x, y, mask)
    rows = ops.kl_divergence(x[[0, 2]], y[[0, 2]])
    assert abs(masked.item() - rows.item()) < 1e-14


# ---------------------------------------------------------------------------- #
# Backward and tape
# ---------------------------------------------------------------------------- #
def test_backward_simple_cases():
    x = randn(2, 3, seed=8)
    grad, = ops.backward(ops.sum(x), [x])
    np.testing.assert_array_equal(grad.numpy(), np.ones((2, 3)))
    grad, = ops.backward(ops.sum(ops.mul(x, x)), [x])
    np.testing.assert_allclose(grad.numpy(), 2 * x.detach().numpy(), rtol=1e-15)


def test_backward_unreachable_leaf_gets_zeros():
    x = randn(2, 2, seed=9)
    unused = randn(3, seed=10)
    grads = ops.backward(ops.sum(x), [x, unused])
    np.testing.assert_array_equal(grads[1].numpy(), np.zeros(3))


def test_backward_rejects_non_scalar():
    x = randn(2, 2, seed=11)
    with pytest.raises(ops.DimensionError):
        ops.backward(ops.mul(x, x), [x])


def test_tape_records_in_order_and_collects_leaves():
    w = randn(3, 2, seed=12)
    b = randn(2, seed=13)
    x = randn(4, 3, seed=14, requires_grad=False)
    with ops.Tape() as tape:
        h = ops.add(ops.matmul(x, w), b)
        loss = ops.mean(ops.relu(h))
        grads = ops.backward(loss)
    assert [n.op for n in tape.nodes] == ['matmul', 'add', 'relu', 'mean']
    for node in tape.nodes:
        assert all(i < node.output_id for i in node.input_ids)
    leaves = tape.leaves()
    assert len(leaves) == 2 and leaves[0] is w and leaves[1] is b
    assert grads[0].shape == w.shape


def test_tape_replay_is_deterministic():
    x = randn(3, 4, seed=15)
    w = randn(4, 4, seed=16)
    with ops.Tape():
        loss = ops.sum(ops.softmax_lastdim(ops.gelu(ops.matmul(x, w))))
        first = ops.backward(loss, [x, w], retain_graph=True)
        second = ops.backward(loss, [x, w])
    for a, b in zip(first, second):
        assert torch.equal(a, b)


def test_non_finite_output_raises():
    x = torch.tensor([1.0, float('inf')], dtype=torch.float64)
    with pytest.raises(ops.NonFiniteError):
        ops.mul(x, torch.zeros(2, dtype=torch.float64))


def test_dropout_is_seeded():
    x = randn(5, 6, seed=17, requires_grad=False)
    assert ops.dropout(x, 0.0, seed=3) is x
    a = ops.dropout(x, 0.3, seed=3)
    b = ops.dropout(x, 0.3, seed=3)
    c = ops.dropout(x, 0.3, seed=4)
    assert torch.equal(a, b)
    assert not torch.equal(a, c)
    kept = a != 0
    np.testing.assert_allclose(a[kept].numpy(), (x[kept] / 0.7).numpy(), rtol=1e-14)


def test_derived_seeds_differ_by_pass():
    assert ops.derive_seed(0, 1, 0, 2) == ops.derive_seed(0, 1, 0, 2)
    assert ops.derive_seed(0, 1, 0, 2) != ops.derive_seed(0, 1, 1, 2)


# ---------------------------------------------------------------------------- #
# Finite-difference checks for every differentiable op
# ---------------------------------------------------------------------------- #
@pytest.mark.parametrize('shape', shapes)
def test_elementwise_gradients(shape):
    a = randn(*shape, seed=20)
    b = randn(*shape, seed=21)
    bias = randn(shape[-1], seed=22)
    s = randn(1, seed=23)
    weights = randn(*shape, seed=24, requires_grad=False)

    def weighted(t):
        return ops.sum(ops.mul(t, weights))

    check_gradients(lambda t: weighted(ops.add(t[0], t[1])), [a, bias])
    check_gradients(lambda t: weighted(ops.mul(t[0], t[1])), [a, b])
    check_gradients(lambda t: weighted(ops.scale(t[0], t[1])), [a, s])
    check_gradients(lambda t: weighted(ops.gelu(t[0])), [a])
    check_gradients(lambda t: weighted(ops.softmax_lastdim(t[0])), [a])
    check_gradients(lambda t: weighted(ops.dropout(t[0], 0.25, seed=5)), [a])


@pytest.mark.parametrize('shape', shapes)
def test_structural_gradients(shape):
    a = randn(*shape, seed=30)
    b = randn(*shape[:-1], 2, seed=31)
    weights = randn(*shape[:-1], shape[-1] + 2, seed=32, requires_grad=False)
    check_gradients(lambda t: ops.sum(ops.mul(ops.concat_lastdim([t[0], t[1]]), weights)), [a, b])

    flat = randn(int(np.prod(shape)), seed=33, requires_grad=False)
    check_gradients(lambda t: ops.sum(ops.mul(ops.reshape(t[0], (-1,)), flat)), [a])

    if len(shape) >= 2:
        wt = randn(*shape[:-2], shape[-1], shape[-2], seed=34, requires_grad=False)
        check_gradients(lambda t: ops.sum(ops.mul(ops.transpose(t[0], -2, -1), wt)), [a])

    check_gradients(lambda t: ops.sum(ops.mean(ops.mul(t[0], t[0]), dim=-1)), [a])


@pytest.mark.parametrize('shape', shapes)
def test_layernorm_gradients(shape):
    x = randn(*shape, seed=40)
    w = randn(shape[-1], seed=41)
    b = randn(shape[-1], seed=42)
    target = randn(*shape, seed=43, requires_grad=False)
    if shape[-1] == 1:
        # normalised value is identically zero; only the bias gets gradient
        out = ops.layernorm(x, w, b)
        np.testing.assert_allclose(out.detach().numpy(), np.broadcast_to(b.detach().numpy(), shape))
        return
    check_gradients(lambda t: ops.sum(ops.mul(ops.layernorm(t[0], t[1], t[2]), target)), [x, w, b])


@pytest.mark.parametrize('num_rows, dim, index', [
    (4, 3, [0, 2, -1, 2]),
    (2, 5, [[1, -1], [0, 1]]),
    (3, 1, [2]),
    (5, 2, [-1, -1, 4, 0, 4, 4]),
    (1, 4, [0, 0]),
])
def test_embedding_lookup(num_rows, dim, index):
    weight = randn(num_rows, dim, seed=50)
    index = torch.tensor(index)
    out = ops.embedding_lookup(weight, index)
    expected = np.zeros(tuple(index.shape) + (dim,))
    for pos in np.ndindex(*index.shape):
        if index[pos] >= 0:
            expected[pos] = weight.detach().numpy()[index[pos]]
    np.testing.assert_array_equal(out.detach().numpy(), expected)
    target = randn(*out.shape, seed=51, requires_grad=False)
    check_gradients(lambda t: ops.sum(ops.mul(ops.embedding_lookup(t[0], index), target)), [weight])


def test_index_add_and_outer_sum_gradients():
    src = randn(5, 3, seed=60)
    index = torch.tensor([0, 2, 2, 1, 0])
    out = ops.index_add(src, index, 4)
    np.testing.assert_allclose(out[3].detach().numpy(), np.zeros(3))
    target = randn(4, 3, seed=61, requires_grad=False)
    check_gradients(lambda t: ops.sum(ops.mul(ops.index_add(t[0], index, 4), target)), [src])

    a = randn(2, 3, 4, seed=62)
    b = randn(2, 3, 4, seed=63)
    pair_target = randn(2, 3, 3, 4, seed=64, requires_grad=False)
    pairs = ops.outer_sum(a, b)
    np.testing.assert_allclose(pairs[1, 0, 2].detach().numpy(), (a[1, 0] + b[1, 2]).detach().numpy())
    check_gradients(lambda t: ops.sum(ops.mul(ops.outer_sum(t[0], t[1]), pair_target)), [a, b])


@pytest.mark.parametrize('seed', range(5))
def test_loss_gradients(seed):
    logits = randn(4, 7, seed=seed)
    other = randn(4, 7, seed=seed + 100)
    targets = torch.tensor([0, 3, 6, 2])
    mask = torch.tensor([True, True, False, True])
    check_gradients(lambda t: ops.cross_entropy(t[0], targets, pad_index=0), [logits])
    check_gradients(lambda t: ops.kl_divergence(t[0], t[1], mask), [logits, other])

    attn = ops.softmax_lastdim(randn(4, 5, seed=seed + 200, requires_grad=False)).requires_grad_(True)
    target = torch.zeros(4, 5, dtype=torch.float64)
    target[0, 1] = 1.0
    target[2, 3] = target[2, 4] = 0.5
    row_mask = target.sum(-1) > 0
    check_gradients(lambda t: ops.alignment_cross_entropy(t[0], target, row_mask), [attn])


def test_masked_fill_blocks_gradient():
    x = randn(2, 3, seed=70)
    mask = torch.tensor([[True, False, False], [False, False, True]])
    grad, = ops.backward(ops.sum(ops.masked_fill(x, mask, -1e9)), [x])
    np.testing.assert_array_equal(grad.numpy(), (~mask).double().numpy())


def test_backward_inside_and_after_tape_block():
    x = randn(2, 3, seed=15)
    with ops.Tape() as tape:
        y = ops.sum(ops.mul(x, x))
        grads = ops.backward(y, retain_graph=True)
    assert len(grads) == len(tape.leaves())
    np.testing.assert_allclose(grads[0].numpy(), 2 * x.detach().numpy(), rtol=1e-15)

    # without an active tape the inputs must be given
    with pytest.raises(RuntimeError):
        ops.backward(y)
    grad, = ops.backward(y, [x])
    np.testing.assert_allclose(grad.numpy(), 2 * x.detach().numpy(), rtol=1e-15)
