import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from retro3d.chem import parse_smiles, tokenize
from retro3d.conformer import (Conformer, ConformerError, load_conformer, conformer_record, read_conformer_file,
                               write_conformer_file, synthetic_conformer, distance_matrix, geo_features,
                               lift_features)

MOLECULES = ['CC(=O)Oc1ccccc1C(=O)O', 'CC(C)(O)CN', 'C1CCC2(CC1)CCCCC2', 'O=C1CCCCC1.Cl']


def _record(coords, maps=None, elements=None):
    atoms = []
    for k, xyz in enumerate(coords):
        atoms.append({'map': None if maps is None else maps[k],
                      'element': None if elements is None else elements[k],
                      'xyz': list(xyz)})
    return {'id': 'r0', 'atoms': atoms}


def _random_conformer(smiles, seed):
    n = parse_smiles(smiles).num_atoms
    return Conformer(np.random.RandomState(seed).normal(scale=1.5, size=(n, 3)))


def _rigid(coords, seed):
    rot = Rotation.random(random_state=seed)
    shift = np.random.RandomState(seed).uniform(-5, 5, size=3)
    return rot.apply(coords) + shift


def test_load_conformer_examples():
    conf = load_conformer(_record([(0, 0, 0), (1, 0, 0)]), 'CO')
    assert len(conf) == 2
    with pytest.raises(ConformerError):
        load_conformer(_record([(0, 0, 0), (1, 0, 0), (2, 0, 0)]), 'CO')
    with pytest.raises(ConformerError):
        load_conformer(_record([(0, 0, 0), (1, float('nan'), 0)]), 'CO')
    with pytest.raises(ConformerError):
        load_conformer(_record([(0, 0, 0), (1, 0, 0)], elements=['C', 'N']), 'CO')


def test_load_conformer_binds_by_atom_map():
    graph = parse_smiles('[CH3:1][CH2:2][OH:3]')
    coords = np.arange(9, dtype=np.float64).reshape(3, 3)
    positional = load_conformer(_record(coords), graph)
    perm = [2, 0, 1]
    shuffled = _record(coords[perm], maps=[graph.atom_maps[p] for p in perm],
                       elements=[graph.atoms[p].element for p in perm])
    by_map = load_conformer(shuffled, graph)
    np.testing.assert_array_equal(by_map.coords, positional.coords)


def test_load_conformer_positional_when_maps_incomplete():
    coords = np.arange(6, dtype=np.float64).reshape(2, 3)
    conf = load_conformer(_record(coords, maps=[2, 1]), 'CO')
    np.testing.assert_array_equal(conf.coords, coords)


def test_conformer_file_round_trip(tmp_path):
    graph = parse_smiles('[CH3:1][OH:2]')
    conf = synthetic_conformer(graph, seed=3)
    path = str(tmp_path / 'conformers.jsonl')
    write_conformer_file(path, [conformer_record('a', graph, conf), conformer_record('b', graph, conf)])
    records = read_conformer_file(path)
    assert sorted(records) == ['a', 'b']
    np.testing.assert_allclose(load_conformer(records['a'], graph).coords, conf.coords)


def test_bad_conformer_file(tmp_path):
    path = tmp_path / 'bad.jsonl'
    path.write_text('{"id": "a", "atoms": []}\nnot json\n')
    with pytest.raises(ConformerError) as excinfo:
        read_conformer_file(str(path))
    assert ':2:' in str(excinfo.value)


def test_synthetic_conformer():
    two = synthetic_conformer('CC', seed=0)
    d = np.linalg.norm(two.coords[0] - two.coords[1])
    assert 1.2 <= d <= 1.8

    np.testing.assert_array_equal(synthetic_conformer(MOLECULES[0], seed=7).coords,
                                  synthetic_conformer(MOLECULES[0], seed=7).coords)

    tri = synthetic_conformer('C1CC1', seed=1).coords
    for a, b in ((0, 1), (1, 2), (0, 2)):
        assert np.linalg.norm(tri[a] - tri[b]) > 0
    assert np.linalg.matrix_rank(tri - tri.mean(0), tol=1e-6) == 2


def test_distance_matrix_examples():
    dm = distance_matrix('CC', Conformer([(0, 0, 0), (3, 4, 0)]))
    assert dm[0, 1] == 5.0

    dm = distance_matrix('C=C', Conformer([(0, 0, 0), (1.3, 0, 0)]))
    assert dm.shape == (3, 3)
    assert not dm[1].any() and not dm[:, 1].any()
    assert abs(dm[0, 2] - 1.3) < 1e-12


@pytest.mark.parametrize('smiles', MOLECULES)
def test_distance_matrix_matches_brute_force(smiles):
    conf = synthetic_conformer(smiles, seed=11)
    tokens = tokenize(smiles)
    binding = parse_smiles(smiles).token_atoms
    dm = distance_matrix(smiles, conf)
    expected = np.zeros((len(tokens), len(tokens)))
    for a in range(len(tokens)):
        for b in range(len(tokens)):
            if binding[a] >= 0 and binding[b] >= 0:
                diff = conf.coords[binding[a]] - conf.coords[binding[b]]
                expected[a, b] = np.sqrt(np.sum(np.square(diff)))
    np.testing.assert_array_equal(dm, expected)
    np.testing.assert_array_equal(dm, dm.T)
    assert not np.diag(dm).any()

    moved = distance_matrix(smiles, Conformer(_rigid(conf.coords, 5)))
    np.testing.assert_allclose(moved, dm, atol=1e-9)


def test_distance_matrix_rejects_wrong_conformer():
    with pytest.raises(ConformerError):
        distance_matrix('CCO', Conformer([(0, 0, 0), (1, 0, 0)]))


def test_geo_features_right_angle():
    conf = Conformer([(0, 0, 0), (1, 0, 0), (0, 1, 0)])
    geo = geo_features('C(C)C', conf)
    assert geo.first[0] == 1
    k = [tuple(p) for p in geo.pairs.tolist()].index((0, 2))
    assert abs(geo.d[k] - 1.0) < 1e-12
    assert abs(geo.theta[k] - math.pi / 2) < 1e-12


@pytest.mark.parametrize('seed', [0, 1, 2])
@pytest.mark.parametrize('smiles', MOLECULES[:3])
def test_geo_features_rigid_invariance(smiles, seed):
    conf = _random_conformer(smiles, seed)
    geo = geo_features(smiles, conf)
    moved = geo_features(smiles, Conformer(_rigid(conf.coords, seed + 100)))
    np.testing.assert_array_equal(moved.pairs, geo.pairs)
    for name in ('d', 'theta', 'phi', 'tau'):
        np.testing.assert_allclose(getattr(moved, name), getattr(geo, name), atol=1e-9)
    assert np.all(geo.theta >= 0) and np.all(geo.theta <= math.pi)
    for name in ('phi', 'tau'):
        values = getattr(geo, name)
        assert np.all(values > -math.pi) and np.all(values <= math.pi)


@pytest.mark.parametrize('smiles', MOLECULES[:3])
def test_geo_features_reflection(smiles):
    conf = _random_conformer(smiles, 42)
    geo = geo_features(smiles, conf)
    mirrored = geo_features(smiles, Conformer(conf.coords * np.array([-1.0, 1.0, 1.0])))
    np.testing.assert_allclose(mirrored.d, geo.d, atol=1e-9)
    np.testing.assert_allclose(mirrored.theta, geo.theta, atol=1e-9)
    np.testing.assert_allclose(mirrored.phi, -geo.phi, atol=1e-9)
    np.testing.assert_allclose(mirrored.tau, -geo.tau, atol=1e-9)


def test_geo_features_degenerate_frames_are_flagged():
    geo = geo_features('CC', Conformer([(0, 0, 0), (1.5, 0, 0)]))
    assert geo.degenerate.all()
    assert np.all(geo.tau == 0.0)

    line = Conformer([(0, 0, 0), (1, 0, 0), (-2, 0, 0)])
    geo = geo_features('C(C)C', line)
    assert np.all(np.isfinite(geo.phi)) and np.all(np.isfinite(geo.tau))
    assert geo.degenerate.any()


def test_lift_features_shape():
    geo = geo_features(MOLECULES[1], _random_conformer(MOLECULES[1], 0))
    lifted = lift_features(geo)
    assert lifted.shape == (geo.num_pairs, 128)
    assert np.all(np.abs(lifted) <= 1.0)
