"""Dense float64 tensor ops with hand-written backward rules."""
from .tape import Tape, TapeNode, NonFiniteError, DimensionError, backward, current_tape, check_finite
from .linalg import matmul, reshape, permute, transpose
from .elementwise import (add, mul, scale, concat_lastdim, outer_sum, gelu, relu,
                          softmax_lastdim, layernorm, dropout, masked_fill)
from .reduction import sum, mean  # noqa: A004
from .indexing import embedding_lookup, index_add
from .loss import cross_entropy, kl_divergence, alignment_cross_entropy
from .gaussian import gaussian_basis, SIGMA_FLOOR
from .seeding import DropoutScope, derive_seed, current_scope
