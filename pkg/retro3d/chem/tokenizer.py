"""SMILES tokenizer.

Splits a SMILES string into atom and non-atom tokens. Two-letter organic
elements (Cl, Br), bracket atoms and two-digit ring labels (%nn) are single
tokens. Concatenating the token texts gives back the input exactly.
"""
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class TokenKind(Enum):
    ATOM = 'atom'
    BRACKET_ATOM = 'bracket_atom'
    BOND = 'bond'
    RING_BOND = 'ring_bond'
    BRANCH = 'branch'
    DOT = 'dot'
    SPECIAL = 'special'


class SmilesParseError(ValueError):
    """Malformed SMILES. ``offset`` is the byte offset of the offending token."""

    def __init__(self, reason, offset=0, smiles=None):
        message = '{} at offset {:d}'.format(reason, offset)
        if smiles is not None:
            message += ' in {!r}'.format(smiles)
        super(SmilesParseError, self).__init__(message)
        self.reason = reason
        self.offset = offset
        self.smiles = smiles


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    atom_map: Optional[int] = None
    offset: int = field(default=0, compare=False)

    @property
    def is_atom(self):
        return self.kind in (TokenKind.ATOM, TokenKind.BRACKET_ATOM)


_TOKEN_PATTERN = re.compile(
    r'(\[[^\[\]]*\]|Br|Cl|B|C|N|O|S|P|F|I|b|c|n|o|s|p|\*'
    r'|%[0-9]{2}|[0-9]|\(|\)|\.|=|#|-|\$|:|/|\\|~|@|\+|\?|>)')
_MAP_PATTERN = re.compile(r':([0-9]+)\]$')

_BOND_CHARS = frozenset('-=#$:/\\~')
_SPECIAL_CHARS = frozenset('@+?>')


def _kind_of(text):
    first = text[0]
    if first == '[':
        return TokenKind.BRACKET_ATOM
    if first == '%' or first.isdigit():
        return TokenKind.RING_BOND
    if first in '()':
        return TokenKind.BRANCH
    if first == '.':
        return TokenKind.DOT
    if first in _BOND_CHARS:
        return TokenKind.BOND
    if first in _SPECIAL_CHARS:
        return TokenKind.SPECIAL
    return TokenKind.ATOM


def _byte_offset(smiles, pos):
    return len(smiles[:pos].encode('utf-8'))


def tokenize(smiles):
    """Split a SMILES string into tokens.

    Args:
        smiles (str): non-empty SMILES, optionally atom-mapped.

    Returns:
        list of Token

    Raises:
        SmilesParseError: empty input, unbalanced bracket or illegal character.

    """
    if not smiles:
        raise SmilesParseError('empty SMILES', 0, smiles)
    tokens = []
    pos = 0
    while pos < len(smiles):
        match = _TOKEN_PATTERN.match(smiles, pos)
        if match is None:
            char = smiles[pos]
            if char in '[]':
                reason = 'unbalanced bracket'
            else:
                reason = 'illegal character {!r}'.format(char)
            raise SmilesParseError(reason, _byte_offset(smiles, pos), smiles)
        text = match.group(0)
        kind = _kind_of(text)
        atom_map = None
        if kind is TokenKind.BRACKET_ATOM:
            map_match = _MAP_PATTERN.search(text)
            if map_match is not None and int(map_match.group(1)) > 0:
                atom_map = int(map_match.group(1))
        tokens.append(Token(text, kind, atom_map, _byte_offset(smiles, pos)))
        pos = match.end()
    return tokens


def detokenize(tokens):
    return ''.join(token.text if isinstance(token, Token) else token for token in tokens)


def split_reaction(reaction):
    """Split ``reactants>reagents>product`` (or ``reactants>>product``).

    Returns:
        tuple: (reactants, product); reagents are dropped.

    """
    parts = reaction.strip().split('>')
    if len(parts) != 3:
        raise SmilesParseError('reaction must have the form reactants>>product', 0, reaction)
    return parts[0], parts[2]
