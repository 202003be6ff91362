"""Assembly of one training example from a reaction and its product conformer."""
import logging
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from retro3d.chem import (build_sam, dataset_filter, parse_smiles, random_root_smiles, root_align,
                          split_reaction, strip_atom_maps, tokenize, SmilesParseError)
from retro3d.conformer import (ConformerError, distance_matrix, geo_features, lift_features, load_conformer,
                               synthetic_conformer)
from retro3d.models.embedding import GEO_FEATURE_DIM, atom_type_index
from .reaction_io import DataError
from .vocab import BOS_INDEX, EOS_INDEX, UNK_INDEX, class_token

logger = logging.getLogger(__name__)

ON_MISSING_CONFORMER = ('skip', 'zero', 'synthetic')


@dataclass
class TokenizedReaction:
    """One framed example.

    ``src_ids`` is ``[BOS, (class), product..., EOS]`` and ``tgt_ids`` is
    ``[BOS, reactants..., EOS]``. Decoder output position t predicts
    ``tgt_ids[t + 1]``, so ``sam[t]`` aligns output position t with the
    source tokens. Geometry arrays are indexed by source position; atom
    indices are local to the product.
    """
    id: str
    product: str
    reactants: str
    src_ids: np.ndarray
    tgt_ids: np.ndarray
    sam: np.ndarray
    dist: np.ndarray
    bond_type: np.ndarray
    pair_mask: np.ndarray
    token_atom: np.ndarray
    atom_types: np.ndarray
    pairs: np.ndarray
    geo: np.ndarray
    src_offset: int = 1
    reaction_class: Optional[int] = None
    has_conformer: bool = True

    @property
    def num_src(self):
        return len(self.src_ids)

    @property
    def num_tgt(self):
        return len(self.tgt_ids) - 1

    @property
    def num_atoms(self):
        return len(self.atom_types)


def _conformer_seed(record_id):
    return zlib.crc32(record_id.encode('utf-8'))


def clean_reaction(record):
    """Cleaned reaction of ``record``; raises DataError when it is rejected."""
    result = dataset_filter(record.reaction)
    if not result.keep:
        raise DataError('reaction {} rejected: {}'.format(record.id, result.reason), line=record.line,
                        reason=result.reason)
    return result.reaction


def resolve_conformer(record, product, conformers, on_missing='zero'):
    """Conformer of the product of ``record``, or None in zero mode."""
    if on_missing not in ON_MISSING_CONFORMER:
        raise ValueError('Unsupported on_missing_conformer: {}'.format(on_missing))
    graph = parse_smiles(product)
    conformer_record = None if conformers is None else conformers.get(record.id)
    if conformer_record is not None:
        return load_conformer(conformer_record, graph)
    if on_missing == 'skip':
        raise DataError('no conformer for reaction {}'.format(record.id), line=record.line,
                        reason='missing conformer')
    if on_missing == 'synthetic':
        logger.debug('synthetic conformer for reaction %s', record.id)
        return synthetic_conformer(graph, seed=_conformer_seed(record.id))
    return None


def encode_source(src_texts, vocab, reaction_class=None):
    """Framed source ids and the offset of the first product token."""
    prefix = [BOS_INDEX]
    if reaction_class is not None:
        prefix.append(vocab.stoi.get(class_token(reaction_class), UNK_INDEX))
    src_ids = np.asarray(prefix + vocab.encode(src_texts) + [EOS_INDEX], dtype=np.int64)
    return src_ids, len(prefix)


def _token_geometry(product, conformer, num_tokens, offset):
    graph = parse_smiles(product)
    size = num_tokens + offset + 1
    dist = np.zeros((size, size), dtype=np.float64)
    bond_type = np.zeros((size, size), dtype=np.int64)
    pair_mask = np.zeros((size, size), dtype=bool)
    token_atom = np.full(size, -1, dtype=np.int64)
    if conformer is None:
        return (dist, bond_type, pair_mask, token_atom, np.zeros(0, dtype=np.int64),
                np.zeros((0, 2), dtype=np.int64), np.zeros((0, GEO_FEATURE_DIM), dtype=np.float64))

    inner = slice(offset, offset + num_tokens)
    dist[inner, inner] = distance_matrix(product, conformer)
    binding = np.asarray(graph.token_atoms, dtype=np.int64)
    token_atom[inner] = binding
    is_atom = token_atom >= 0
    pair_mask[:] = is_atom[:, None] & is_atom[None, :]
    for bond in graph.bonds:
        ti = graph.atoms[bond.begin].token_index + offset
        tj = graph.atoms[bond.end].token_index + offset
        bond_type[ti, tj] = bond_type[tj, ti] = bond.order.value

    geo = geo_features(graph, conformer)
    atom_types = np.asarray([atom_type_index(atom) for atom in graph.atoms], dtype=np.int64)
    return dist, bond_type, pair_mask, token_atom, atom_types, geo.pairs, lift_features(geo)


def assemble(record, vocab, conformers=None, on_missing='zero', use_class=False, max_length=512, rng=None):
    """Build a TokenizedReaction.

    Args:
        record (ReactionRecord): atom-mapped reaction.
        vocab (Vocab): token vocabulary.
        conformers (dict, optional): conformer records keyed by reaction id.
        on_missing (str): 'skip' rejects reactions without a conformer, 'zero'
            drops the 3D inputs, 'synthetic' embeds the product graph.
        use_class (bool): prepend the reaction-class token to the source.
        max_length (int): maximum framed sequence length.
        rng (numpy.random.RandomState, optional): when given, the product is
            rewritten from a random root atom.

    Returns:
        TokenizedReaction

    Raises:
        DataError: the reaction is filtered out, lacks a conformer in skip
            mode, or is too long.

    """
    reaction = clean_reaction(record)
    reactants, product = split_reaction(reaction)
    try:
        conformer = resolve_conformer(record, product, conformers, on_missing)
        if rng is not None:
            product, order = random_root_smiles(product, rng)
            if conformer is not None:
                conformer = conformer.permute(order)
        reactants = root_align(product, reactants).smiles
        sam = build_sam(product, reactants).entries
        src_texts = [t.text for t in tokenize(strip_atom_maps(product))]
        tgt_texts = [t.text for t in tokenize(strip_atom_maps(reactants))]
    except (SmilesParseError, ConformerError) as e:
        raise DataError('reaction {}: {}'.format(record.id, e), line=record.line)

    if use_class and record.reaction_class is None:
        raise DataError('reaction {} has no class'.format(record.id), line=record.line)
    src_ids, offset = encode_source(src_texts, vocab, record.reaction_class if use_class else None)
    tgt_ids = np.asarray([BOS_INDEX] + vocab.encode(tgt_texts) + [EOS_INDEX], dtype=np.int64)
    if len(src_ids) > max_length or len(tgt_ids) > max_length:
        raise DataError('reaction {} exceeds max length {}'.format(record.id, max_length), line=record.line,
                        reason='too long')

    framed_sam = np.zeros((len(tgt_ids) - 1, len(src_ids)), dtype=np.float64)
    framed_sam[:sam.shape[0], offset:offset + sam.shape[1]] = sam
    dist, bond_type, pair_mask, token_atom, atom_types, pairs, geo = _token_geometry(
        product, conformer, len(src_texts), offset)

    return TokenizedReaction(
        id=record.id,
        product=product,
        reactants=reactants,
        src_ids=src_ids,
        tgt_ids=tgt_ids,
        sam=framed_sam,
        dist=dist,
        bond_type=bond_type,
        pair_mask=pair_mask,
        token_atom=token_atom,
        atom_types=atom_types,
        pairs=pairs,
        geo=geo,
        src_offset=offset,
        reaction_class=record.reaction_class,
        has_conformer=conformer is not None,
    )


def product_example(product, vocab, conformer=None, reaction_class=None, max_length=512):
    """Source-only example for prediction.

    ``product`` may be atom-mapped or plain; ``conformer`` must be bound to
    its atoms. A class token is prepended when ``reaction_class`` is given.
    """
    src_texts = [t.text for t in tokenize(strip_atom_maps(product))]
    src_ids, offset = encode_source(src_texts, vocab, reaction_class)
    if len(src_ids) > max_length:
        raise DataError('product exceeds max length {}'.format(max_length))
    dist, bond_type, pair_mask, token_atom, atom_types, pairs, geo = _token_geometry(
        product, conformer, len(src_texts), offset)
    return TokenizedReaction(
        id='query', product=product, reactants='', src_ids=src_ids,
        tgt_ids=np.asarray([BOS_INDEX, EOS_INDEX], dtype=np.int64),
        sam=np.zeros((1, len(src_ids)), dtype=np.float64),
        dist=dist, bond_type=bond_type, pair_mask=pair_mask, token_atom=token_atom,
        atom_types=atom_types, pairs=pairs, geo=geo, src_offset=offset,
        reaction_class=reaction_class, has_conformer=conformer is not None)
