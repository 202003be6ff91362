"""Conformer records: file I/O, atom binding and a synthetic embedder."""
import json
import logging

import numpy as np

from retro3d.chem import parse_smiles

logger = logging.getLogger(__name__)

BOND_LENGTH = 1.5
REPULSION_RADIUS = 2.5
EMBED_ITERATIONS = 200
EMBED_STEP = 0.05


class ConformerError(ValueError):
    pass


class Conformer(object):
    """3D coordinates in angstroms, one row per MolGraph atom index."""

    def __init__(self, coords):
        coords = np.asarray(coords, dtype=np.float64)
        if coords.size == 0:
            coords = coords.reshape(0, 3)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise ConformerError('Conformer coordinates must be (N, 3), got {}'.format(coords.shape))
        if not np.all(np.isfinite(coords)):
            raise ConformerError('Conformer has non-finite coordinates')
        self.coords = coords

    def __len__(self):
        return self.coords.shape[0]

    def permute(self, order):
        """Coordinates re-indexed so that new atom k is old atom ``order[k]``."""
        return Conformer(self.coords[np.asarray(order, dtype=np.int64)])

    def __repr__(self):
        return 'Conformer(num_atoms={:d})'.format(len(self))


def load_conformer(record, graph):
    """Bind a conformer record to the atoms of ``graph``.

    Binding is by atom map when every record atom and every graph atom carries
    one, otherwise by position.

    Args:
        record (dict): ``{"id": str, "atoms": [{"map", "element", "xyz"}]}``.
        graph (MolGraph or str): molecule the coordinates belong to.

    Returns:
        Conformer

    Raises:
        ConformerError: count or element mismatch, unknown map, bad coordinates.

    """
    graph = parse_smiles(graph)
    atoms = record.get('atoms', [])
    if len(atoms) != graph.num_atoms:
        raise ConformerError('Conformer {} has {:d} atoms, molecule has {:d}'.format(
            record.get('id'), len(atoms), graph.num_atoms))

    record_maps = [a.get('map') for a in atoms]
    graph_maps = graph.atom_maps
    if atoms and all(m is not None for m in record_maps) and all(m is not None for m in graph_maps):
        by_map = {m: a for m, a in zip(record_maps, atoms)}
        if len(by_map) != len(atoms):
            raise ConformerError('Conformer {} repeats an atom map'.format(record.get('id')))
        try:
            ordered = [by_map[m] for m in graph_maps]
        except KeyError as e:
            raise ConformerError('Conformer {} has no atom with map {}'.format(record.get('id'), e.args[0]))
    else:
        ordered = atoms

    for k, atom in enumerate(ordered):
        element = atom.get('element')
        if element and element.capitalize() != graph.atoms[k].element.capitalize():
            raise ConformerError('Conformer {} atom {:d} is {}, molecule has {}'.format(
                record.get('id'), k, element, graph.atoms[k].element))
        if len(atom.get('xyz', ())) != 3:
            raise ConformerError('Conformer {} atom {:d} needs three coordinates'.format(record.get('id'), k))
    return Conformer([atom['xyz'] for atom in ordered])


def conformer_record(record_id, graph, conformer):
    """Inverse of ``load_conformer`` for a bound conformer."""
    graph = parse_smiles(graph)
    return {
        'id': record_id,
        'atoms': [{'map': atom.atom_map, 'element': atom.element, 'xyz': [float(x) for x in xyz]}
                  for atom, xyz in zip(graph.atoms, conformer.coords)],
    }


def read_conformer_file(path):
    """Read a JSON-lines conformer file into ``{id: record}``."""
    records = dict()
    with open(path, 'r') as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except ValueError as e:
                raise ConformerError('{}:{:d}: {}'.format(path, lineno, e))
            if 'id' not in record:
                raise ConformerError('{}:{:d}: record without id'.format(path, lineno))
            if record['id'] in records:
                logger.warning('%s:%d: duplicate conformer id %s, keeping the first', path, lineno, record['id'])
                continue
            records[record['id']] = record
    return records


def write_conformer_file(path, records):
    with open(path, 'w') as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + '\n')


def synthetic_conformer(graph, seed=0):
    """Deterministic spring embedding.

    Bonded atoms are pulled towards 1.5 A, other pairs closer than 2.5 A are
    pushed apart. Plain gradient descent with a fixed step and iteration count
    from seeded random starting coordinates.

    Args:
        graph (MolGraph or str): molecule to embed.
        seed (int): seed of the starting coordinates.

    Returns:
        Conformer

    """
    graph = parse_smiles(graph)
    n = graph.num_atoms
    rng = np.random.RandomState(seed)
    x = rng.normal(scale=1.0, size=(n, 3))
    bonded = np.zeros((n, n), dtype=bool)
    for bond in graph.bonds:
        bonded[bond.begin, bond.end] = bonded[bond.end, bond.begin] = True
    others = ~bonded & ~np.eye(n, dtype=bool)

    for _ in range(EMBED_ITERATIONS):
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt(np.sum(np.square(diff), -1)) + np.eye(n)
        coef = np.where(bonded, 2.0 * (dist - BOND_LENGTH), 0.0)
        coef += np.where(others & (dist < REPULSION_RADIUS), -2.0 * (REPULSION_RADIUS - dist), 0.0)
        grad = np.sum((coef / dist)[:, :, None] * diff, axis=1)
        x = x - EMBED_STEP * grad
    return Conformer(x)
