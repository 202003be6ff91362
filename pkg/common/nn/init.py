from torch import nn


def xavier_uniform(module):
    """Glorot-uniform weight and zero bias.

    The bound depends on fan_in + fan_out only, so weights stored as
    (in_features, out_features) get the same init as torch's layout.
    """
    if module.weight is not None:
        nn.init.xavier_uniform_(module.weight)
    if module.bias is not None:
        nn.init.zeros_(module.bias)


def embedding_normal(weight):
    """N(0, dim^-0.5) for a (num_embeddings, dim) table."""
    nn.init.normal_(weight, mean=0.0, std=weight.shape[-1] ** -0.5)
