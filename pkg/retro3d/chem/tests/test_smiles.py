import glob
import os.path as osp
from collections import defaultdict

import networkx as nx
import numpy as np
import pytest

from retro3d.chem import (Atom, MolGraph, SmilesParseError, TokenKind, BondOrder, tokenize, detokenize, parse_smiles,
                          write, write_with_order, strip_atom_maps, random_root_smiles,
                          canonical_key, split_components, split_reaction)

SAMPLE_DIR = osp.join(osp.dirname(__file__), '..', '..', '..', 'data', 'sample')

MOLECULES = [
    'CCO',
    'C1CC1',
    'c1ccccc1',
    'CC(=O)Oc1ccccc1C(=O)O',
    'C1CC2CCC1C2',
    '[NH3+]CC(=O)[O-]',
    'c1ccc2[nH]ccc2c1',
    'CC(C)(C)OC(=O)N1CCC(CC1)C#N',
    'c1ccccc1-c1ccccc1',
    'O=C1CCCCC1.Cl',
    'C[C@@H](N)C(=O)O',
    'C1CCC2(CC1)CCCCC2',
    'Brc1ccc(cc1)S(=O)(=O)Cl',
]

MAPPED = [
    '[CH3:1][C:2](=[O:3])[OH:4]',
    '[CH3:1][CH2:2][OH:3]',
    '[c:1]1[cH:2][cH:3][cH:4][cH:5][cH:6]1',
    '[NH2:1][CH2:2][C:3](=[O:4])[O:5][CH2:6][CH3:7].[Cl-:8]',
]


def _node_match(a, b):
    keys = ('element', 'aromatic', 'charge', 'hcount', 'atom_map', 'isotope')
    return all(a[k] == b[k] for k in keys)


def _edge_match(a, b):
    return a['order'] == b['order']


def _isomorphic(g1, g2):
    return nx.is_isomorphic(g1.to_networkx(), g2.to_networkx(),
                            node_match=_node_match, edge_match=_edge_match)


def test_tokenize_examples():
    assert [t.text for t in tokenize('CCO')] == ['C', 'C', 'O']
    assert [t.text for t in tokenize('CC(=O)Cl')] == ['C', 'C', '(', '=', 'O', ')', 'Cl']
    tokens = tokenize('[CH3:5]')
    assert len(tokens) == 1
    assert tokens[0].kind is TokenKind.BRACKET_ATOM
    assert tokens[0].atom_map == 5
    assert [t.text for t in tokenize('C%12CC%12')] == ['C', '%12', 'C', 'C', '%12']


@pytest.mark.parametrize('smiles', MOLECULES + MAPPED)
def test_tokenize_round_trip(smiles):
    tokens = tokenize(smiles)
    assert detokenize(tokens) == smiles
    for token in tokens:
        if not token.is_atom:
            assert token.atom_map is None


def test_tokenize_errors_carry_offsets():
    with pytest.raises(SmilesParseError) as excinfo:
        tokenize('C[C')
    assert excinfo.value.offset == 1
    assert excinfo.value.reason == 'unbalanced bracket'
    with pytest.raises(SmilesParseError) as excinfo:
        tokenize('CC&')
    assert excinfo.value.offset == 2
    with pytest.raises(SmilesParseError):
        tokenize('')


def test_parse_examples():
    triangle = parse_smiles('C1CC1')
    assert triangle.num_atoms == 3
    assert len(triangle.bonds) == 3
    assert all(b.order is BondOrder.SINGLE for b in triangle.bonds)

    benzene = parse_smiles('c1ccccc1')
    assert benzene.num_atoms == 6
    assert all(a.aromatic for a in benzene.atoms)
    assert len(benzene.bonds) == 6
    assert all(b.order is BondOrder.AROMATIC for b in benzene.bonds)
    assert all(a.hcount == 1 for a in benzene.atoms)


@pytest.mark.parametrize('smiles', ['C(', 'C1CC', 'C)', 'C(=)C', 'C=', '.C', 'C11', 'C1C1', 'C()C'])
def test_parse_rejects_malformed(smiles):
    with pytest.raises(SmilesParseError):
        parse_smiles(smiles)


def test_parse_bracket_atoms():
    graph = parse_smiles('[13CH3:7][NH3+].[O-2]')
    c, n, o = graph.atoms
    assert (c.isotope, c.hcount, c.atom_map) == (13, 3, 7)
    assert (n.charge, n.hcount) == (1, 3)
    assert o.charge == -2
    assert graph.components() == [[0, 1], [2]]


def test_write_rooted_at_oxygen():
    assert write(parse_smiles('CCO'), 2) == 'OCC'


def test_write_keeps_component_order():
    assert write(parse_smiles('CCO.Cl'), 0) == 'CCO.Cl'
    assert write(parse_smiles('CCO.Cl'), 3) == 'CCO.Cl'


def test_triangle_any_root():
    graph = parse_smiles('C1CC1')
    for root in range(3):
        back = parse_smiles(write(graph, root))
        assert back.num_atoms == 3
        assert nx.is_isomorphic(back.to_networkx(), nx.cycle_graph(3))


@pytest.mark.parametrize('smiles', MOLECULES + MAPPED)
def test_reparse_is_isomorphic_for_every_root(smiles):
    graph = parse_smiles(smiles)
    for root in range(graph.num_atoms):
        text, order = write_with_order(graph, root)
        back = parse_smiles(text)
        assert _isomorphic(graph, back), (root, text)
        assert sorted(order) == list(range(graph.num_atoms))
        for k, source in enumerate(order):
            assert back.atoms[k].element == graph.atoms[source].element
            assert back.atoms[k].atom_map == graph.atoms[source].atom_map


def test_write_flips_slash_bonds_in_reverse():
    graph = parse_smiles('F/C=C/F')
    assert write(graph, 0) == 'F/C=C/F'
    assert write(graph, 3) == 'F\\C=C\\F'


def test_write_ring_labels():
    assert write(parse_smiles('C%10CC%10'), 0) == 'C1CC1'
    # a closed label is free again for the next ring
    assert write(parse_smiles('C1CC1C1CC1'), 0) == 'C1CC1C1CC1'


def test_strip_atom_maps_keeps_token_count():
    for smiles in MAPPED:
        stripped = strip_atom_maps(smiles)
        assert len(tokenize(stripped)) == len(tokenize(smiles))
        assert all(t.atom_map is None for t in tokenize(stripped))
    assert strip_atom_maps('[CH3:1][C:2](=[O:3])[OH:4]') == 'CC(=O)O'
    assert strip_atom_maps('[NH3+:1][CH3:2]') == '[NH3+]C'


def test_random_root_smiles():
    rng = np.random.RandomState(0)
    graph = parse_smiles(MOLECULES[3])
    seen = set()
    for _ in range(20):
        text, order = random_root_smiles(MOLECULES[3], rng)
        assert _isomorphic(graph, parse_smiles(text))
        seen.add(order[0])
    assert len(seen) > 1


def test_split_components():
    assert split_components('CCO.[Na+].Cl') == ['CCO', '[Na+]', 'Cl']
    assert split_components('CCO') == ['CCO']


def test_canonical_key_examples():
    assert canonical_key(parse_smiles('OCC')) == canonical_key(parse_smiles('CCO'))
    assert canonical_key('CCO') != canonical_key('CCN')
    assert canonical_key('[CH3:1][OH:2]') == canonical_key('CO')
    assert canonical_key('CCO.Cl') == canonical_key('Cl.OCC')
    assert canonical_key('CC(=O)O') != canonical_key('CC(O)=C')


@pytest.mark.parametrize('smiles', MOLECULES + MAPPED)
def test_canonical_key_invariant_under_root(smiles):
    graph = parse_smiles(smiles)
    key = canonical_key(graph)
    for root in range(graph.num_atoms):
        assert canonical_key(write(graph, root)) == key


def test_canonical_key_is_valid_smiles():
    for smiles in MOLECULES:
        key = canonical_key(smiles)
        assert canonical_key(key) == key


def _ch_graph(nx_graph, order):
    """CH-only molecule on the edges of ``nx_graph``, atoms added in ``order``."""
    index = {node: k for k, node in enumerate(order)}
    graph = MolGraph()
    for _ in order:
        graph.add_atom(Atom('C', hcount=1))
    for u, v in nx_graph.edges():
        graph.add_bond(index[u], index[v], BondOrder.SINGLE)
    return graph


def test_canonical_key_on_asymmetric_regular_graph():
    # 3-regular with a trivial automorphism group: refinement alone leaves every atom tied
    frucht = nx.frucht_graph()
    graph = _ch_graph(frucht, sorted(frucht.nodes()))
    keys = {canonical_key(write(graph, root)) for root in range(graph.num_atoms)}
    rng = np.random.RandomState(0)
    for _ in range(5):
        shuffled = _ch_graph(frucht, list(rng.permutation(sorted(frucht.nodes()))))
        keys.add(canonical_key(shuffled))
    assert len(keys) == 1

    # a different cubic graph on 12 vertices gets a different key
    other = _ch_graph(nx.circular_ladder_graph(6), list(range(12)))
    assert canonical_key(other) not in keys


def _sample_molecules():
    molecules = set()
    for path in sorted(glob.glob(osp.join(SAMPLE_DIR, '*.txt'))):
        with open(path) as f:
            for text in f:
                for side in split_reaction(text.split('\t')[0]):
                    molecules.update(split_components(strip_atom_maps(side)))
    return sorted(molecules)


def test_canonical_key_separates_sample_molecules():
    molecules = _sample_molecules()
    assert len(molecules) > 200
    graphs = {smiles: parse_smiles(smiles) for smiles in molecules}
    keys = {smiles: canonical_key(graph) for smiles, graph in graphs.items()}

    # same key if and only if isomorphic, checked within each element formula
    by_formula = defaultdict(list)
    for smiles, graph in graphs.items():
        by_formula[tuple(sorted(a.element for a in graph.atoms))].append(smiles)
    for group in by_formula.values():
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                assert (keys[a] == keys[b]) == _isomorphic(graphs[a], graphs[b]), (a, b)

    rng = np.random.RandomState(0)
    for k in range(500):
        smiles = molecules[k % len(molecules)]
        rewritten, _ = random_root_smiles(smiles, rng)
        assert canonical_key(rewritten) == keys[smiles], (smiles, rewritten)
