"""Syntax and valence plausibility check for predicted SMILES."""
import math

from .graph import BondOrder, parse_smiles
from .tokenizer import SmilesParseError

# maximum total valence of a neutral atom
MAX_VALENCE = {
    'B': 3, 'C': 4, 'N': 3, 'O': 2, 'F': 1, 'Si': 4, 'P': 5, 'S': 6,
    'Cl': 1, 'Br': 1, 'I': 1,
}
_ACCEPTOR_ELEMENTS = frozenset(['B'])


def valence_limit(element, charge):
    """Allowed total valence; None when the element is not checked."""
    limit = MAX_VALENCE.get(element)
    if limit is None:
        return None
    if charge > 0 and element in ('N', 'O', 'P', 'S'):
        return limit + charge
    if charge < 0 and element in _ACCEPTOR_ELEMENTS:
        return limit - charge
    return max(0, limit - abs(charge))


def atom_valence(graph, atom):
    """Bond-order sum plus hydrogens, aromatic bonds counting 1.5 (floored).

    Aromatic atoms that donate a lone pair to the ring (O, S, or an atom
    written with explicit H) have no ring double bond and count their
    aromatic bonds as 1.
    """
    a = graph.atoms[atom]
    orders = graph.bond_orders(atom)
    pyrrole_like = a.aromatic and (a.element in ('O', 'S') or (a.bracket and a.hcount > 0))
    total = 0.0
    for order in orders:
        if order is BondOrder.AROMATIC and pyrrole_like:
            total += 1.0
        else:
            total += order.valence
    return int(math.floor(total)) + a.hcount


def validity_check(smiles):
    """True iff ``smiles`` parses and no checked atom exceeds its valence."""
    if not isinstance(smiles, str) or not smiles:
        return False
    try:
        graph = parse_smiles(smiles)
    except SmilesParseError:
        return False
    for k, atom in enumerate(graph.atoms):
        limit = valence_limit(atom.element, atom.charge)
        if limit is not None and atom_valence(graph, k) > limit:
            return False
    return True
