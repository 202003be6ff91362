"""Canonical SMILES keys for exact-match comparison.

Atoms are ranked by iterative neighbourhood refinement (Morgan style). Ties
that refinement cannot split are resolved by a search tree: every atom of the
first tied class is singled out in turn, the ranking is refined again, and
the lexicographically smallest string over all fully ranked leaves is the
canonical one. Atom maps, chirality tags and slash bonds are ignored, so the
key identifies the constitution only.
"""
from .graph import BondOrder, parse_smiles
from .writer import write_with_order

_BOND_CODE = {BondOrder.SINGLE: 1, BondOrder.DOUBLE: 2, BondOrder.TRIPLE: 3, BondOrder.AROMATIC: 4}


def _dense_ranks(keys):
    lookup = {key: rank for rank, key in enumerate(sorted(set(keys)))}
    return [lookup[key] for key in keys]


def _refine(graph, ranks):
    while True:
        keys = []
        for atom in range(graph.num_atoms):
            env = sorted((ranks[nbr], _BOND_CODE[graph.bonds[b].order]) for nbr, b in graph.neighbors(atom))
            keys.append((ranks[atom], tuple(env)))
        new_ranks = _dense_ranks(keys)
        if len(set(new_ranks)) == len(set(ranks)):
            return new_ranks
        ranks = new_ranks


def atom_invariant(graph, atom):
    a = graph.atoms[atom]
    return (a.atomic_number, int(a.aromatic), a.charge, graph.degree(atom), a.hcount,
            -1 if a.isotope is None else a.isotope)


def _neighbourhood(graph, atom, exclude):
    return {nbr: _BOND_CODE[graph.bonds[b].order] for nbr, b in graph.neighbors(atom) if nbr != exclude}


def _branch_atoms(graph, members):
    """Members of a tied class worth singling out.

    Twins (tied atoms with the same neighbours through the same bond orders)
    are swapped by an automorphism and give identical subtrees, so one of
    each twin group is kept.
    """
    kept = []
    for atom in members:
        if not any(_neighbourhood(graph, atom, other) == _neighbourhood(graph, other, atom) for other in kept):
            kept.append(atom)
    return kept


def _write(graph, ranks):
    root = min(range(graph.num_atoms), key=lambda i: ranks[i])
    smiles, _ = write_with_order(graph, root, ranks=ranks, with_map=False, with_stereo=False)
    return '.'.join(sorted(smiles.split('.')))


def _search(graph):
    """(smiles, ranks) of the smallest leaf of the individualize-and-refine tree."""
    start = _refine(graph, _dense_ranks([atom_invariant(graph, i) for i in range(graph.num_atoms)]))
    best = None
    stack = [start]
    while stack:
        ranks = stack.pop()
        if len(set(ranks)) == graph.num_atoms:
            smiles = _write(graph, ranks)
            if best is None or smiles < best[0]:
                best = (smiles, ranks)
            continue
        counts = dict()
        for r in ranks:
            counts[r] = counts.get(r, 0) + 1
        tied = min(r for r, c in counts.items() if c > 1)
        members = [i for i, r in enumerate(ranks) if r == tied]
        for chosen in _branch_atoms(graph, members):
            child = _dense_ranks([(r, 0 if i == chosen else 1) for i, r in enumerate(ranks)])
            stack.append(_refine(graph, child))
    return best


def canonical_ranks(graph):
    """Distinct canonical rank per atom, independent of the input atom order."""
    graph = parse_smiles(graph)
    if graph.num_atoms == 0:
        return []
    return _search(graph)[1]


def canonical_smiles(graph):
    """Canonical string of each component, sorted and joined by '.'."""
    graph = parse_smiles(graph)
    if graph.num_atoms == 0:
        return ''
    return _search(graph)[0]


def canonical_key(smiles):
    """Key equal for isomorphic molecule sets regardless of atom order or maps.

    Args:
        smiles (str or MolGraph): possibly dot-separated molecule set.

    Returns:
        str: canonical key.

    Raises:
        SmilesParseError: if ``smiles`` does not parse.

    """
    return canonical_smiles(smiles)
