import logging
import math

import torch

from .tape import recorded, DimensionError

SIGMA_FLOOR = 1e-3

logger = logging.getLogger(__name__)


class GaussianBasisFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, d, gamma, beta, mu, sigma, sign):
        abs_sigma = sigma.abs()
        clamped = abs_sigma < SIGMA_FLOOR
        s = torch.where(clamped, torch.full_like(abs_sigma, SIGMA_FLOOR), abs_sigma)
        x = (gamma * d + beta).unsqueeze(-1)
        z = (x - mu) / s
        psi = sign * torch.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * s)
        ctx.save_for_backward(d, gamma, psi, z, s, sigma, clamped)
        return psi

    @staticmethod
    def backward(ctx, grad_output):
        d, gamma, psi, z, s, sigma, clamped = ctx.saved_tensors
        g = grad_output * psi
        lead = tuple(range(psi.dim() - 1))
        # d psi / d x = -psi * z / s, d psi / d mu = psi * z / s
        grad_x = -(g * z / s).sum(-1)
        grad_mu = (g * z / s).sum(dim=lead)
        grad_s = (g * (z * z - 1.0) / s).sum(dim=lead)
        ds_dsigma = torch.where(clamped, torch.zeros_like(sigma), torch.sign(sigma))
        grad_sigma = grad_s * ds_dsigma
        return grad_x * gamma, grad_x * d, grad_x, grad_mu, grad_sigma, None


@recorded('gaussian_basis')
def gaussian_basis(d, gamma, beta, mu, sigma, negate=True):
    """Gaussian basis expansion of affine-transformed distances.

    psi^k = sign / (sqrt(2 pi) |sigma^k|) * exp(-((gamma d + beta - mu^k) / |sigma^k|)^2 / 2)

    with ``sign = -1`` when ``negate``. ``|sigma|`` is floored at 1e-3.

    Args:
        d (torch.Tensor): (...) non-negative distances
        gamma (torch.Tensor): (...) per-pair scale (gathered by bond type)
        beta (torch.Tensor): (...) per-pair shift
        mu (torch.Tensor): (K,) kernel centres
        sigma (torch.Tensor): (K,) kernel widths
        negate (bool): keep the leading minus sign

    Returns:
        torch.Tensor: (..., K)

    """
    if gamma.shape != d.shape or beta.shape != d.shape:
        raise DimensionError('gaussian_basis: gamma/beta must match distances {}'.format(tuple(d.shape)))
    if mu.dim() != 1 or mu.shape != sigma.shape:
        raise DimensionError('gaussian_basis: mu and sigma must be (K,), got {} and {}'.format(
            tuple(mu.shape), tuple(sigma.shape)))
    if d.numel() > 0 and float(d.min()) < 0:
        raise ValueError('gaussian_basis: negative distance')
    num_clamped = int((sigma.detach().abs() < SIGMA_FLOOR).sum())
    if num_clamped:
        logger.warning('gaussian_basis: %d kernel width(s) below %.0e clamped', num_clamped, SIGMA_FLOOR)
    sign = -1.0 if negate else 1.0
    return GaussianBasisFunction.apply(d, gamma, beta, mu, sigma, sign)
