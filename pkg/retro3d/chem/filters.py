"""Reaction cleaning rules applied before training."""
from collections import Counter, namedtuple

from .graph import parse_smiles, split_components
from .tokenizer import SmilesParseError, split_reaction

MIN_PRODUCT_ATOMS = 5

INVALID_SMILES = 'invalid smiles'
DUPLICATE_MAP = 'duplicate atom map'
SMALL_PRODUCT = 'product<5 atoms'
UNMATCHED_PRODUCT_ATOM = 'product atom missing from reactants'
REMOVED_REACTANT = 'reactant without product atoms'

FilterResult = namedtuple('FilterResult', ['keep', 'reason', 'reaction', 'removed'])


def _drop(reason, reaction):
    return FilterResult(False, reason, reaction, 0)


def dataset_filter(reaction):
    """Apply the cleaning rules to one ``reactants>>product`` reaction.

    Rules, in order: invalid or empty SMILES, duplicated atom-map numbers,
    product with fewer than five atoms, product atoms (by atom map) absent
    from the reactants. Reactant components that share no atom with the
    product are removed; the reaction itself is kept.

    Args:
        reaction (str): atom-mapped reaction SMILES.

    Returns:
        FilterResult: (keep, reason, cleaned reaction, number of removed
            reactant components). ``reason`` is None for an untouched keep.

    """
    try:
        reactants, product = split_reaction(reaction)
        if not reactants or not product:
            return _drop(INVALID_SMILES, reaction)
        product_graph = parse_smiles(product)
        segments = split_components(reactants)
        reactant_graphs = [parse_smiles(seg) for seg in segments]
    except SmilesParseError:
        return _drop(INVALID_SMILES, reaction)

    product_maps = product_graph.atom_maps
    reactant_maps = [m for g in reactant_graphs for m in g.atom_maps if m is not None]
    counts = Counter([m for m in product_maps if m is not None])
    if any(c > 1 for c in counts.values()) or any(c > 1 for c in Counter(reactant_maps).values()):
        return _drop(DUPLICATE_MAP, reaction)
    if product_graph.num_atoms < MIN_PRODUCT_ATOMS:
        return _drop(SMALL_PRODUCT, reaction)
    available = set(reactant_maps)
    if any(m is None or m not in available for m in product_maps):
        return _drop(UNMATCHED_PRODUCT_ATOM, reaction)

    wanted = set(product_maps)
    kept = [seg for seg, g in zip(segments, reactant_graphs) if wanted.intersection(g.atom_maps)]
    removed = len(segments) - len(kept)
    if removed == 0:
        return FilterResult(True, None, reaction, 0)
    head = reaction.strip().split('>')
    cleaned = '{}>{}>{}'.format('.'.join(kept), head[1], head[2])
    return FilterResult(True, REMOVED_REACTANT, cleaned, removed)
