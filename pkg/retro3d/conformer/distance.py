import numpy as np

from retro3d.chem import tokenize, parse
from .conformer import ConformerError


def pairwise_distances(coords):
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt(np.sum(np.square(diff), -1))


def distance_matrix(smiles, conformer):
    """Token-level 3D distance matrix.

    Rows and columns follow the tokens of ``smiles``. Pairs of atom tokens get
    the Euclidean distance of their atoms; rows and columns of non-atom tokens
    are zero.

    Args:
        smiles (str): SMILES whose atoms the conformer is bound to.
        conformer (Conformer): coordinates per atom index.

    Returns:
        np.ndarray: (M, M) float64, M = number of tokens.

    """
    tokens = tokenize(smiles)
    graph = parse(tokens)
    if graph.num_atoms != len(conformer):
        raise ConformerError('Conformer has {:d} atoms, {!r} has {:d}'.format(
            len(conformer), smiles, graph.num_atoms))
    binding = np.asarray(graph.token_atoms, dtype=np.int64)
    token_idx = np.nonzero(binding >= 0)[0]
    dist = np.zeros((len(tokens), len(tokens)), dtype=np.float64)
    dist[np.ix_(token_idx, token_idx)] = pairwise_distances(conformer.coords[binding[token_idx]])
    return dist
