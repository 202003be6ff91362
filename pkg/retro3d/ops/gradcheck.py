"""Central finite differences, used by the gradient test-suite."""
import torch


def numerical_gradient(fn, inputs, eps=1e-4):
    """Central-difference gradient of a scalar function.

    Args:
        fn (callable): maps the list ``inputs`` to a scalar tensor.
        inputs (list of torch.Tensor): float64 tensors; perturbed in place
            and restored.
        eps (float): step size.

    Returns:
        list of torch.Tensor: one gradient per input.

    """
    grads = []
    with torch.no_grad():
        for x in inputs:
            grad = torch.zeros_like(x)
            flat = x.view(-1)
            flat_grad = grad.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                f_plus = float(fn(inputs))
                flat[i] = orig - eps
                f_minus = float(fn(inputs))
                flat[i] = orig
                flat_grad[i] = (f_plus - f_minus) / (2.0 * eps)
            grads.append(grad)
    return grads


def relative_error(analytic, numeric, floor=1e-8):
    """||a - n|| / max(||a||, ||n||, floor)."""
    diff = torch.norm(analytic - numeric).item()
    scale = max(torch.norm(analytic).item(), torch.norm(numeric).item(), floor)
    return diff / scale
