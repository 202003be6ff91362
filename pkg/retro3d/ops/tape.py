"""Operation tape, numeric error states and the backward entry point.

Every op in this package runs through torch autograd with a hand-written
backward rule. The tape is a thread-local record of which ops ran on which
tensors; it gives the training step a list of leaves to differentiate and
lets tests audit the recorded graph.
"""
import functools
import threading
from collections import namedtuple

import torch


class NonFiniteError(ArithmeticError):
    """An op produced NaN or Inf."""

    def __init__(self, op_name, count):
        super(NonFiniteError, self).__init__(
            '{} produced {:d} non-finite value(s)'.format(op_name, count))
        self.op_name = op_name
        self.count = count


class DimensionError(ValueError):
    """Shapes of the operands do not satisfy the op contract."""


TapeNode = namedtuple('TapeNode', ['node_id', 'op', 'input_ids', 'output_id'])

_local = threading.local()


def _stack():
    if not hasattr(_local, 'tapes'):
        _local.tapes = []
    return _local.tapes


def current_tape():
    stack = _stack()
    return stack[-1] if stack else None


class Tape(object):
    """Ordered record of differentiable operations.

    Node ids are assigned in execution order, so every node's inputs were
    recorded (or registered as leaves) before the node itself.

    Examples:
        >>> with Tape() as tape:
        ...     y = ops.sum(ops.mul(x, x))
        ...     grads = backward(y)  # gradients of the tape leaves

    Outside the block ``backward`` needs its inputs: ``backward(y, [x])``.
    """

    def __init__(self):
        self.nodes = []
        self._tensors = []
        self._ids = dict()
        self._leaf_ids = []
        self._owner = None

    def _lookup(self, tensor):
        key = id(tensor)
        if key in self._ids and self._tensors[self._ids[key]] is tensor:
            return self._ids[key]
        return None

    def _register(self, tensor):
        tensor_id = len(self._tensors)
        self._tensors.append(tensor)
        self._ids[id(tensor)] = tensor_id
        return tensor_id

    def record(self, op_name, inputs, output):
        input_ids = []
        for x in inputs:
            if not isinstance(x, torch.Tensor):
                continue
            tensor_id = self._lookup(x)
            if tensor_id is None:
                tensor_id = self._register(x)
                if x.requires_grad and x.grad_fn is None:
                    self._leaf_ids.append(tensor_id)
            input_ids.append(tensor_id)
        output_id = self._register(output)
        node = TapeNode(len(self.nodes), op_name, tuple(input_ids), output_id)
        self.nodes.append(node)
        return node

    def leaves(self):
        """Tensors that require grad and were not produced by a recorded op."""
        return [self._tensors[i] for i in self._leaf_ids]

    def tensor(self, tensor_id):
        return self._tensors[tensor_id]

    def __len__(self):
        return len(self.nodes)

    def __enter__(self):
        if self._owner is not None:
            raise RuntimeError('Tape is already active')
        self._owner = threading.get_ident()
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        stack = _stack()
        assert stack and stack[-1] is self
        stack.pop()
        self._owner = None
        return False


def check_finite(op_name, tensor):
    if not tensor.is_floating_point():
        return
    finite = torch.isfinite(tensor)
    if not bool(finite.all()):
        raise NonFiniteError(op_name, int((~finite).sum()))


def recorded(op_name):
    """Decorate a public op: check its output and record it on the active tape."""

    def decorator(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            output = fn(*args, **kwargs)
            check_finite(op_name, output)
            tape = current_tape()
            if tape is not None:
                inputs = list(args) + [v for v in kwargs.values()]
                flat = []
                for x in inputs:
                    if isinstance(x, (list, tuple)):
                        flat.extend(x)
                    else:
                        flat.append(x)
                tape.record(op_name, flat, output)
            return output

        return wrapper

    return decorator


def backward(loss, inputs=None, retain_graph=False):
    """Reverse pass from a scalar loss.

    Args:
        loss (torch.Tensor): scalar produced by tape-recorded ops.
        inputs (list of torch.Tensor, optional): tensors to differentiate
            against. Defaults to the leaves of the active tape.
        retain_graph (bool): keep the autograd graph for another pass.

    Returns:
        list of torch.Tensor: gradients aligned with ``inputs``. Inputs the
            loss does not depend on get zeros.

    """
    if loss.numel() != 1:
        raise DimensionError('backward expects a scalar loss, got shape {}'.format(tuple(loss.shape)))
    if inputs is None:
        tape = current_tape()
        if tape is None:
            raise RuntimeError('backward without inputs requires an active tape')
        inputs = tape.leaves()
    inputs = list(inputs)
    if not inputs:
        return []
    if not loss.requires_grad:
        return [torch.zeros_like(x) for x in inputs]
    grads = torch.autograd.grad(loss.reshape(()), inputs,
                                allow_unused=True,
                                retain_graph=retain_graph)
    return [torch.zeros_like(x) if g is None else g for x, g in zip(inputs, grads)]
