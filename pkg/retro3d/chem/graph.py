"""Molecular graphs parsed from SMILES tokens."""
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import networkx as nx

from .tokenizer import Token, TokenKind, SmilesParseError, tokenize

# index == atomic number
ELEMENTS = (
    '*', 'H', 'He', 'Li', 'Be', 'B', 'C', 'N', 'O', 'F', 'Ne', 'Na', 'Mg', 'Al', 'Si', 'P', 'S', 'Cl', 'Ar',
    'K', 'Ca', 'Sc', 'Ti', 'V', 'Cr', 'Mn', 'Fe', 'Co', 'Ni', 'Cu', 'Zn', 'Ga', 'Ge', 'As', 'Se', 'Br', 'Kr',
    'Rb', 'Sr', 'Y', 'Zr', 'Nb', 'Mo', 'Tc', 'Ru', 'Rh', 'Pd', 'Ag', 'Cd', 'In', 'Sn', 'Sb', 'Te', 'I', 'Xe',
    'Cs', 'Ba', 'La', 'Ce', 'Pr', 'Nd', 'Pm', 'Sm', 'Eu', 'Gd', 'Tb', 'Dy', 'Ho', 'Er', 'Tm', 'Yb', 'Lu',
    'Hf', 'Ta', 'W', 'Re', 'Os', 'Ir', 'Pt', 'Au', 'Hg', 'Tl', 'Pb', 'Bi', 'Po', 'At', 'Rn',
    'Fr', 'Ra', 'Ac', 'Th', 'Pa', 'U', 'Np', 'Pu', 'Am', 'Cm', 'Bk', 'Cf', 'Es', 'Fm', 'Md', 'No', 'Lr',
    'Rf', 'Db', 'Sg', 'Bh', 'Hs', 'Mt', 'Ds', 'Rg', 'Cn', 'Nh', 'Fl', 'Mc', 'Lv', 'Ts', 'Og',
)
ATOMIC_NUMBER = {symbol: z for z, symbol in enumerate(ELEMENTS)}

ORGANIC_SUBSET = frozenset(['B', 'C', 'N', 'O', 'P', 'S', 'F', 'Cl', 'Br', 'I', '*'])
AROMATIC_ORGANIC = frozenset(['B', 'C', 'N', 'O', 'P', 'S'])
AROMATIC_BRACKET = frozenset(['B', 'C', 'N', 'O', 'P', 'S', 'Se', 'As', 'Te'])

# default valences for implicit hydrogens of bare atoms
DEFAULT_VALENCES = {
    'B': (3,), 'C': (4,), 'N': (3, 5), 'O': (2,), 'P': (3, 5), 'S': (2, 4, 6),
    'F': (1,), 'Cl': (1,), 'Br': (1,), 'I': (1,),
}

_BRACKET_PATTERN = re.compile(
    r'^\[(?P<isotope>[0-9]+)?'
    r'(?P<symbol>[A-Z][a-z]?|[a-z][a-z]?|\*)'
    r'(?P<chirality>@@?(?:TH[12]|AL[12]|SP[123]|TB[0-9]{1,2}|OH[0-9]{1,2})?)?'
    r'(?P<hcount>H[0-9]*)?'
    r'(?P<charge>[+-]{1,2}[0-9]*)?'
    r'(?::(?P<map>[0-9]+))?\]$')


class BondOrder(Enum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self):
        return 1.5 if self is BondOrder.AROMATIC else float(self.value)


# bond-type index 0 is reserved for "no bond"
NUM_BOND_TYPES = len(BondOrder) + 1

BOND_SYMBOLS = {
    '-': (BondOrder.SINGLE, ''),
    '=': (BondOrder.DOUBLE, ''),
    '#': (BondOrder.TRIPLE, ''),
    ':': (BondOrder.AROMATIC, ''),
    '/': (BondOrder.SINGLE, '/'),
    '\\': (BondOrder.SINGLE, '\\'),
}


@dataclass
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    hcount: int = 0
    chirality: str = ''
    atom_map: Optional[int] = None
    isotope: Optional[int] = None
    bracket: bool = False
    token_index: int = -1

    @property
    def atomic_number(self):
        return ATOMIC_NUMBER[self.element]


@dataclass
class Bond:
    begin: int
    end: int
    order: BondOrder
    stereo: str = ''

    def other(self, atom):
        return self.end if atom == self.begin else self.begin


class MolGraph(object):
    """Atoms and bonds of one SMILES string (possibly several components).

    Atom ``k`` is the ``k``-th atom token of the source SMILES, so
    ``atom_tokens[k]`` gives its token position and ``token_atoms`` maps
    every token back to an atom index (-1 for non-atom tokens).
    """

    def __init__(self, tokens=()):
        self.tokens = list(tokens)
        self.atoms = []
        self.bonds = []
        self._adjacency = []
        self._bond_index = dict()

    @property
    def num_atoms(self):
        return len(self.atoms)

    @property
    def atom_tokens(self):
        return [atom.token_index for atom in self.atoms]

    @property
    def token_atoms(self):
        binding = [-1] * len(self.tokens)
        for k, atom in enumerate(self.atoms):
            if atom.token_index >= 0:
                binding[atom.token_index] = k
        return binding

    @property
    def atom_maps(self):
        return [atom.atom_map for atom in self.atoms]

    def add_atom(self, atom):
        self.atoms.append(atom)
        self._adjacency.append([])
        return len(self.atoms) - 1

    def add_bond(self, begin, end, order, stereo=''):
        if begin == end:
            raise ValueError('self-loop on atom {}'.format(begin))
        key = (min(begin, end), max(begin, end))
        if key in self._bond_index:
            raise ValueError('duplicate bond between atoms {} and {}'.format(begin, end))
        self.bonds.append(Bond(begin, end, order, stereo))
        bond_idx = len(self.bonds) - 1
        self._bond_index[key] = bond_idx
        self._adjacency[begin].append((end, bond_idx))
        self._adjacency[end].append((begin, bond_idx))
        return bond_idx

    def neighbors(self, atom):
        """(neighbor, bond index) pairs ordered by neighbor index."""
        return sorted(self._adjacency[atom])

    def degree(self, atom):
        return len(self._adjacency[atom])

    def bond_between(self, a, b):
        idx = self._bond_index.get((min(a, b), max(a, b)))
        return None if idx is None else self.bonds[idx]

    def bond_orders(self, atom):
        return [self.bonds[b].order for _, b in self._adjacency[atom]]

    def total_hcount(self, atom):
        return self.atoms[atom].hcount

    def to_networkx(self):
        g = nx.Graph()
        for k, atom in enumerate(self.atoms):
            g.add_node(k, element=atom.element, aromatic=atom.aromatic, charge=atom.charge,
                       hcount=atom.hcount, atom_map=atom.atom_map, isotope=atom.isotope)
        for bond in self.bonds:
            g.add_edge(bond.begin, bond.end, order=bond.order)
        return g

    def components(self):
        """Connected components as sorted atom lists, ordered by their lowest atom."""
        comps = [sorted(c) for c in nx.connected_components(self.to_networkx())]
        return sorted(comps, key=lambda c: c[0])

    def __repr__(self):
        return 'MolGraph(atoms={:d}, bonds={:d})'.format(len(self.atoms), len(self.bonds))


def implicit_hcount(element, aromatic, bond_orders):
    """Implicit hydrogens of a bare (unbracketed) atom.

    Aromatic atoms count each aromatic bond as 1 plus one for the ring system
    and only use their lowest default valence.
    """
    valences = DEFAULT_VALENCES.get(element)
    if not valences:
        return 0
    if aromatic:
        if element in ('O', 'S'):
            return 0
        total = sum(1 if o is BondOrder.AROMATIC else o.value for o in bond_orders) + 1
        return max(0, valences[0] - total)
    total = sum(1 if o is BondOrder.AROMATIC else o.value for o in bond_orders)
    for valence in valences:
        if valence >= total:
            return valence - total
    return 0


def _parse_charge(text):
    if not text:
        return 0
    sign = 1 if text[0] == '+' else -1
    if len(text) > 1 and text[1] in '+-':
        if text[1] != text[0] or len(text) > 2:
            raise ValueError(text)
        return 2 * sign
    return sign * (int(text[1:]) if len(text) > 1 else 1)


def _atom_from_token(token, token_index):
    if token.kind is TokenKind.ATOM:
        text = token.text
        aromatic = text.islower()
        element = text.capitalize() if aromatic else text
        return Atom(element=element, aromatic=aromatic, token_index=token_index)

    match = _BRACKET_PATTERN.match(token.text)
    if match is None:
        raise SmilesParseError('bad bracket atom {}'.format(token.text), token.offset)
    symbol = match.group('symbol')
    aromatic = symbol.islower()
    element = symbol.capitalize() if aromatic else symbol
    if element not in ATOMIC_NUMBER or (aromatic and element not in AROMATIC_BRACKET):
        raise SmilesParseError('unknown element {}'.format(symbol), token.offset)
    hcount_text = match.group('hcount')
    hcount = 0
    if hcount_text:
        hcount = int(hcount_text[1:]) if len(hcount_text) > 1 else 1
    try:
        charge = _parse_charge(match.group('charge'))
    except ValueError:
        raise SmilesParseError('bad charge in {}'.format(token.text), token.offset)
    atom_map = match.group('map')
    isotope = match.group('isotope')
    return Atom(element=element,
                aromatic=aromatic,
                charge=charge,
                hcount=hcount,
                chirality=match.group('chirality') or '',
                atom_map=int(atom_map) if atom_map and int(atom_map) > 0 else None,
                isotope=int(isotope) if isotope else None,
                bracket=True,
                token_index=token_index)


def _default_order(atom_a, atom_b):
    return BondOrder.AROMATIC if (atom_a.aromatic and atom_b.aromatic) else BondOrder.SINGLE


def parse(tokens):
    """Build a MolGraph from tokens.

    Raises:
        SmilesParseError: unclosed ring bond, dangling or empty branch,
            misplaced bond or dot, self-loop, duplicate bond, bad bracket atom.

    """
    tokens = list(tokens)
    if not tokens:
        raise SmilesParseError('empty SMILES', 0)
    graph = MolGraph(tokens)
    prev = None
    pending = None  # (order, stereo, token)
    branches = []  # (atom, token)
    rings = dict()  # label -> (atom, pending, token)

    def fail(reason, token):
        raise SmilesParseError(reason, token.offset, ''.join(t.text for t in tokens))

    for ti, token in enumerate(tokens):
        kind = token.kind
        if token.is_atom:
            atom = _atom_from_token(token, ti)
            idx = graph.add_atom(atom)
            if prev is not None:
                if pending is not None:
                    order, stereo = pending[0], pending[1]
                else:
                    order, stereo = _default_order(graph.atoms[prev], atom), ''
                graph.add_bond(prev, idx, order, stereo)
            elif pending is not None:
                fail('bond without preceding atom', pending[2])
            pending = None
            prev = idx
        elif kind is TokenKind.BOND:
            if prev is None or pending is not None:
                fail('misplaced bond {!r}'.format(token.text), token)
            if token.text not in BOND_SYMBOLS:
                fail('unsupported bond {!r}'.format(token.text), token)
            order, stereo = BOND_SYMBOLS[token.text]
            pending = (order, stereo, token)
        elif kind is TokenKind.RING_BOND:
            if prev is None:
                fail('ring bond without atom', token)
            label = token.text
            if label in rings:
                other, opened, open_token = rings.pop(label)
                if opened is not None and pending is not None and opened[:2] != pending[:2]:
                    fail('conflicting ring bond {}'.format(label), token)
                if other == prev:
                    fail('ring bond {} closes on its own atom'.format(label), token)
                if graph.bond_between(other, prev) is not None:
                    fail('duplicate bond through ring bond {}'.format(label), token)
                if opened is not None:
                    graph.add_bond(other, prev, opened[0], opened[1])
                elif pending is not None:
                    graph.add_bond(prev, other, pending[0], pending[1])
                else:
                    graph.add_bond(other, prev, _default_order(graph.atoms[other], graph.atoms[prev]))
            else:
                rings[label] = (prev, pending, token)
            pending = None
        elif kind is TokenKind.BRANCH:
            if token.text == '(':
                if prev is None or pending is not None:
                    fail('branch without atom', token)
                branches.append((prev, token))
            else:
                if not branches:
                    fail('unbalanced branch', token)
                if pending is not None:
                    fail('dangling bond', pending[2])
                if tokens[ti - 1].text == '(':
                    fail('empty branch', token)
                prev = branches.pop()[0]
        elif kind is TokenKind.DOT:
            if prev is None or pending is not None or branches:
                fail('misplaced dot', token)
            prev = None
        else:
            fail('unsupported token {!r}'.format(token.text), token)

    if pending is not None:
        fail('dangling bond', pending[2])
    if branches:
        fail('dangling branch', branches[-1][1])
    if rings:
        label, (_, _, token) = sorted(rings.items(), key=lambda kv: kv[1][2].offset)[0]
        fail('unclosed ring bond {}'.format(label), token)
    if prev is None:
        fail('empty component', tokens[-1])

    for k, atom in enumerate(graph.atoms):
        if not atom.bracket:
            atom.hcount = implicit_hcount(atom.element, atom.aromatic, graph.bond_orders(k))
    return graph


def parse_smiles(smiles):
    """tokenize + parse."""
    if isinstance(smiles, MolGraph):
        return smiles
    return parse(tokenize(smiles))


def split_components(smiles):
    """Split a SMILES string at top-level dots, keeping each segment's text."""
    tokens = tokenize(smiles)
    segments = [[]]
    depth = 0
    for token in tokens:
        if token.kind is TokenKind.BRANCH:
            depth += 1 if token.text == '(' else -1
        if token.kind is TokenKind.DOT and depth == 0:
            segments.append([])
        else:
            segments[-1].append(token.text)
    return [''.join(seg) for seg in segments]
