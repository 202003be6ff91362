"""SMILES writing from a chosen root atom."""
from .graph import (BondOrder, MolGraph, ORGANIC_SUBSET, AROMATIC_ORGANIC,
                    implicit_hcount, parse_smiles)
from .tokenizer import tokenize

_FLIP_STEREO = {'/': '\\', '\\': '/'}


def _charge_text(charge):
    if charge == 0:
        return ''
    sign = '+' if charge > 0 else '-'
    return sign if abs(charge) == 1 else '{}{:d}'.format(sign, abs(charge))


def atom_text(graph, index, with_map=True, with_chirality=True):
    """Text of one atom: bare when the organic subset allows it, else bracketed."""
    atom = graph.atoms[index]
    symbol = atom.element.lower() if atom.aromatic else atom.element
    atom_map = atom.atom_map if with_map else None
    chirality = atom.chirality if with_chirality else ''
    bare_ok = (atom.element in ORGANIC_SUBSET
               and (not atom.aromatic or atom.element in AROMATIC_ORGANIC)
               and atom.charge == 0
               and atom.isotope is None
               and not chirality
               and atom_map is None
               and atom.hcount == implicit_hcount(atom.element, atom.aromatic, graph.bond_orders(index)))
    if bare_ok:
        return symbol
    parts = ['[']
    if atom.isotope is not None:
        parts.append(str(atom.isotope))
    parts.append(symbol)
    parts.append(chirality)
    if atom.hcount:
        parts.append('H' if atom.hcount == 1 else 'H{:d}'.format(atom.hcount))
    parts.append(_charge_text(atom.charge))
    if atom_map is not None:
        parts.append(':{:d}'.format(atom_map))
    parts.append(']')
    return ''.join(parts)


def bond_text(graph, bond_index, from_atom, with_stereo=True):
    """Bond symbol when walking the bond from ``from_atom``; '' if implicit."""
    bond = graph.bonds[bond_index]
    to_atom = bond.other(from_atom)
    both_aromatic = graph.atoms[from_atom].aromatic and graph.atoms[to_atom].aromatic
    if bond.order is BondOrder.SINGLE:
        if bond.stereo and with_stereo:
            return bond.stereo if from_atom == bond.begin else _FLIP_STEREO[bond.stereo]
        return '-' if both_aromatic else ''
    if bond.order is BondOrder.DOUBLE:
        return '='
    if bond.order is BondOrder.TRIPLE:
        return '#'
    return '' if both_aromatic else ':'


def _ring_label(digit):
    return str(digit) if digit < 10 else '%{:02d}'.format(digit)


def _dfs_tree(graph, root, sort_key):
    visited = dict()
    children = dict()
    ring_bonds = dict()
    ring_set = set()

    def visit(atom, parent_bond):
        visited[atom] = len(visited)
        children[atom] = []
        ring_bonds.setdefault(atom, [])
        for nbr, bond_idx in sorted(graph.neighbors(atom), key=lambda nb: sort_key(nb[0])):
            if bond_idx == parent_bond:
                continue
            if nbr not in visited:
                children[atom].append((nbr, bond_idx))
                visit(nbr, bond_idx)
            elif bond_idx not in ring_set:
                ring_set.add(bond_idx)
                ring_bonds[atom].append((nbr, bond_idx))
                ring_bonds.setdefault(nbr, []).append((atom, bond_idx))

    visit(root, None)
    return children, ring_bonds


def _emit(graph, root, sort_key, with_map, with_stereo, order):
    children, ring_bonds = _dfs_tree(graph, root, sort_key)
    out = []
    open_digits = dict()

    def emit(atom, in_bond, from_atom):
        if in_bond is not None:
            out.append(bond_text(graph, in_bond, from_atom, with_stereo))
        out.append(atom_text(graph, atom, with_map=with_map, with_chirality=with_stereo))
        order.append(atom)
        closed_here = []
        for nbr, bond_idx in sorted(ring_bonds[atom], key=lambda nb: sort_key(nb[0])):
            if bond_idx in open_digits:
                digit = open_digits.pop(bond_idx)
                closed_here.append(digit)
                out.append(_ring_label(digit))
            else:
                used = set(open_digits.values()).union(closed_here)
                digit = 1
                while digit in used:
                    digit += 1
                if digit > 99:
                    raise ValueError('more than 99 open ring bonds')
                open_digits[bond_idx] = digit
                out.append(bond_text(graph, bond_idx, atom, with_stereo) + _ring_label(digit))
        kids = children[atom]
        for i, (nbr, bond_idx) in enumerate(kids):
            if i < len(kids) - 1:
                out.append('(')
                emit(nbr, bond_idx, atom)
                out.append(')')
            else:
                emit(nbr, bond_idx, atom)

    emit(root, None, None)
    return ''.join(out)


def write_with_order(graph, root=0, ranks=None, with_map=True, with_stereo=True):
    """Write SMILES and report the atom order of the output.

    Args:
        graph (MolGraph or str): molecule(s) to write.
        root (int): first atom of its component's traversal.
        ranks (list of int, optional): neighbour priority; defaults to atom index.
        with_map (bool): keep atom-map numbers.
        with_stereo (bool): keep chirality tags and slash bonds.

    Returns:
        tuple: (smiles, order) where ``order[k]`` is the graph atom written k-th.
            Re-parsing the string makes atom k correspond to ``order[k]``.

    """
    graph = parse_smiles(graph)
    if graph.num_atoms == 0:
        return '', []
    if not 0 <= root < graph.num_atoms:
        raise IndexError('root {} out of range for {} atoms'.format(root, graph.num_atoms))
    if ranks is None:
        sort_key = lambda i: i  # noqa: E731
    else:
        sort_key = lambda i: (ranks[i], i)  # noqa: E731
    pieces = []
    order = []
    for comp in graph.components():
        start = root if root in comp else min(comp, key=sort_key)
        pieces.append(_emit(graph, start, sort_key, with_map, with_stereo, order))
    return '.'.join(pieces), order


def write(graph, root=0):
    """Write SMILES starting the traversal at ``root``.

    Neighbours are visited in atom-index order; components keep the order of
    their lowest atom index.
    """
    return write_with_order(graph, root)[0]


def strip_atom_maps(smiles):
    """Drop atom maps token by token; the token count is unchanged."""
    tokens = tokenize(smiles)
    graph = parse_smiles(smiles)
    binding = graph.token_atoms
    pieces = []
    for ti, token in enumerate(tokens):
        if binding[ti] >= 0:
            pieces.append(atom_text(graph, binding[ti], with_map=False))
        else:
            pieces.append(token.text)
    return ''.join(pieces)


def random_root_smiles(smiles, rng):
    """Rewrite from a uniformly drawn root atom.

    Args:
        smiles (str): SMILES to rewrite.
        rng (numpy.random.RandomState): source of the root choice.

    Returns:
        tuple: (smiles, order) as in ``write_with_order``.

    """
    graph = parse_smiles(smiles)
    root = int(rng.randint(graph.num_atoms))
    return write_with_order(graph, root)


__all__ = ['atom_text', 'bond_text', 'write', 'write_with_order', 'strip_atom_maps',
           'random_root_smiles', 'MolGraph']
