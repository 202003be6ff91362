import logging
import random

import numpy as np
import torch

logger = logging.getLogger(__name__)


def resolve_seed(seed):
    """``seed`` itself, or a fresh 32-bit seed when it is negative."""
    if seed >= 0:
        return int(seed)
    seed = int(np.random.SeedSequence().generate_state(1)[0])
    logger.info('Using time seed %d', seed)
    return seed


def set_random_seed(seed):
    if seed < 0:
        return
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
