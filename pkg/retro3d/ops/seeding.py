"""Per-call dropout seeds.

A seed is a pure function of (global seed, step, forward pass, call site), so
the two dropout-perturbed passes of one step are reproducible and distinct.
"""
import threading

import numpy as np

_local = threading.local()


def derive_seed(seed, step, pass_index, site):
    entropy = [int(seed) & 0xFFFFFFFF, int(step), int(pass_index), int(site)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint32)[0])


class DropoutScope(object):
    """Context supplying (seed, step, pass) to every dropout call inside it."""

    def __init__(self, seed, step=0, pass_index=0):
        self.seed = seed
        self.step = step
        self.pass_index = pass_index

    def seed_for(self, site):
        return derive_seed(self.seed, self.step, self.pass_index, site)

    def __enter__(self):
        if not hasattr(_local, 'scopes'):
            _local.scopes = []
        _local.scopes.append(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        _local.scopes.pop()
        return False


def current_scope():
    scopes = getattr(_local, 'scopes', None)
    return scopes[-1] if scopes else None
