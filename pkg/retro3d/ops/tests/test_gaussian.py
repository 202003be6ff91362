import math

import numpy as np
import pytest
import torch

from retro3d import ops
from retro3d.ops.gradcheck import numerical_gradient, relative_error


def gaussian_basis_np(d, gamma, beta, mu, sigma, negate=True):
    s = np.maximum(np.abs(sigma), ops.SIGMA_FLOOR)
    z = ((gamma * d + beta)[..., None] - mu) / s
    sign = -1.0 if negate else 1.0
    return sign * np.exp(-0.5 * z ** 2) / (math.sqrt(2 * math.pi) * s)


def test_point_value_at_origin():
    one = torch.ones(1, dtype=torch.float64)
    zero = torch.zeros(1, dtype=torch.float64)
    psi = ops.gaussian_basis(zero, one, zero, zero, one)
    assert abs(psi.item() - (-0.398942)) < 1e-6
    assert abs(psi.item() + 1.0 / math.sqrt(2 * math.pi)) < 1e-15


def test_peak_at_kernel_centre():
    d = torch.tensor([2.5], dtype=torch.float64)
    mu = torch.linspace(0, 5, 11, dtype=torch.float64)
    sigma = torch.ones(11, dtype=torch.float64)
    psi = ops.gaussian_basis(d, torch.ones(1, dtype=torch.float64), torch.zeros(1, dtype=torch.float64),
                             mu, sigma)
    assert int(torch.argmax(psi.abs())) == 5


@pytest.mark.parametrize('seed, shape, k, negate', [
    (0, (3,), 4, True),
    (1, (2, 3), 5, True),
    (2, (4, 4), 2, False),
    (3, (1,), 8, True),
    (4, (2, 2, 3), 3, False),
])
def test_matches_numpy_and_finite_differences(seed, shape, k, negate):
    rng = np.random.RandomState(seed)
    d = torch.tensor(rng.uniform(0, 5, shape))
    gamma = torch.tensor(rng.uniform(0.5, 1.5, shape), requires_grad=True)
    beta = torch.tensor(rng.normal(0, 0.5, shape), requires_grad=True)
    mu = torch.tensor(rng.uniform(0, 5, k), requires_grad=True)
    sigma = torch.tensor(rng.uniform(0.5, 2.0, k) * rng.choice([-1, 1], k), requires_grad=True)

    psi = ops.gaussian_basis(d, gamma, beta, mu, sigma, negate=negate)
    expected = gaussian_basis_np(d.numpy(), gamma.detach().numpy(), beta.detach().numpy(),
                                 mu.detach().numpy(), sigma.detach().numpy(), negate)
    np.testing.assert_allclose(psi.detach().numpy(), expected, rtol=1e-12)

    weights = torch.tensor(rng.normal(size=tuple(shape) + (k,)))
    inputs = [gamma, beta, mu, sigma]

    def fn(t):
        return ops.sum(ops.mul(ops.gaussian_basis(d, t[0], t[1], t[2], t[3], negate=negate), weights))

    analytic = ops.backward(fn(inputs), inputs)
    numeric = numerical_gradient(fn, inputs, eps=1e-4)
    for a, n in zip(analytic, numeric):
        assert relative_error(a, n) < 1e-3


def test_small_sigma_is_floored():
    d = torch.tensor([0.0], dtype=torch.float64)
    one = torch.ones(1, dtype=torch.float64)
    zero = torch.zeros(1, dtype=torch.float64)
    sigma = torch.tensor([1e-6], dtype=torch.float64, requires_grad=True)
    psi = ops.gaussian_basis(d, one, zero, zero, sigma)
    assert abs(psi.item() + 1.0 / (math.sqrt(2 * math.pi) * ops.SIGMA_FLOOR)) < 1e-9
    grad, = ops.backward(ops.sum(psi), [sigma])
    assert grad.item() == 0.0


def test_negative_distance_rejected():
    one = torch.ones(1, dtype=torch.float64)
    with pytest.raises(ValueError):
        ops.gaussian_basis(-one, one, one * 0, one * 0, one)
