"""Root-aligned reactant rewriting and product/reactant token alignment."""
import logging
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .graph import parse_smiles, split_components
from .tokenizer import tokenize
from .writer import write

logger = logging.getLogger(__name__)

RootAlignResult = namedtuple('RootAlignResult', ['smiles', 'aligned'])


def root_align(product, reactants):
    """Re-root the reactant that shares the first product atom map.

    Product atom maps are scanned in token order; the first reactant atom
    carrying one of them becomes the root of its component, which is
    rewritten. The other components keep their text and order.

    Args:
        product (str): atom-mapped product SMILES.
        reactants (str): atom-mapped reactants SMILES (dot-separated).

    Returns:
        RootAlignResult: ``aligned`` is False when no atom map is shared, in
            which case ``smiles`` is the input unchanged.

    """
    product_maps = [m for m in parse_smiles(product).atom_maps if m is not None]
    segments = split_components(reactants)
    graphs = [parse_smiles(seg) for seg in segments]
    for atom_map in product_maps:
        for k, graph in enumerate(graphs):
            maps = graph.atom_maps
            if atom_map in maps:
                segments[k] = write(graph, maps.index(atom_map))
                return RootAlignResult('.'.join(segments), True)
    logger.debug('no shared atom map between %s and %s', product, reactants)
    return RootAlignResult(reactants, False)


@dataclass
class AlignmentMap:
    """Binary (reactant tokens, product tokens) alignment matrix."""
    entries: np.ndarray

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    @property
    def pairs(self):
        return sorted(zip(*[idx.tolist() for idx in np.nonzero(self.entries)]))

    def is_empty(self):
        return not self.entries.any()


def build_sam(product, reactants):
    """Token alignment between reactants (rows) and product (columns).

    Every unvisited atom-mapped reactant token is paired with the product
    token of the same atom map, then the pair is extended forward while the
    tokens have equal text or equal atom maps. Afterwards each recorded pair
    is extended backward while the tokens have equal text and are not atoms.

    Args:
        product (str): atom-mapped product SMILES.
        reactants (str): atom-mapped reactants SMILES.

    Returns:
        AlignmentMap

    """
    p_tokens = tokenize(product)
    r_tokens = tokenize(reactants)
    num_r, num_p = len(r_tokens), len(p_tokens)
    product_index = dict()
    for j, token in enumerate(p_tokens):
        if token.atom_map is not None:
            product_index.setdefault(token.atom_map, j)

    sam = np.zeros((num_r, num_p), dtype=np.uint8)
    visited = np.zeros(num_r, dtype=bool)
    for start in range(num_r):
        token = r_tokens[start]
        if visited[start] or token.atom_map is None or token.atom_map not in product_index:
            continue
        i, j = start, product_index[token.atom_map]
        while i < num_r and j < num_p:
            r, p = r_tokens[i], p_tokens[j]
            same_map = r.atom_map is not None and r.atom_map == p.atom_map
            if not (r.text == p.text or same_map):
                break
            sam[i, j] = 1
            visited[i] = True
            i += 1
            j += 1

    for i, j in zip(*np.nonzero(sam.copy())):
        i, j = i - 1, j - 1
        while i >= 0 and j >= 0 and r_tokens[i].text == p_tokens[j].text and not r_tokens[i].is_atom:
            sam[i, j] = 1
            i -= 1
            j -= 1
    return AlignmentMap(sam)
