from .tokenizer import Token, TokenKind, SmilesParseError, tokenize, detokenize, split_reaction
from .graph import (Atom, Bond, BondOrder, MolGraph, NUM_BOND_TYPES, parse, parse_smiles,
                    split_components, implicit_hcount)
from .writer import atom_text, write, write_with_order, strip_atom_maps, random_root_smiles
from .canonical import canonical_key, canonical_ranks, canonical_smiles
from .alignment import AlignmentMap, RootAlignResult, build_sam, root_align
from .validity import validity_check
from .filters import FilterResult, dataset_filter
