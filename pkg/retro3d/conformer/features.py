"""Local geometric features of bonded atom pairs.

For each atom i a local frame is built from its nearest bonded neighbour f_i
and its second nearest bonded neighbour s_i (the nearest non-bonded atom when
i has a single bond). For each bonded neighbour j of i:

    d   distance |c_j - c_i|
    theta  angle between c_j - c_i and c_f - c_i, in [0, pi]
    phi    azimuth of c_j around the i -> f_i axis, measured from s_i, in (-pi, pi]
    tau    dihedral (ref_j, j, i, ref_i) with ref_x = f_x, or s_x if f_x is the
           other atom of the pair, in (-pi, pi]
"""
import math
from dataclasses import dataclass

import numpy as np

from retro3d.chem import parse_smiles
from .conformer import ConformerError

DEGENERATE_EPS = 1e-8
NUM_FREQUENCIES = 16


@dataclass
class GeoFeatures:
    pairs: np.ndarray  # (E, 2) int64, ordered (i, j)
    d: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    degenerate: np.ndarray  # (E,) bool, phi or tau fell back to 0
    first: np.ndarray  # (N,) f_i, -1 if none
    second: np.ndarray  # (N,) s_i, -1 if none

    @property
    def num_pairs(self):
        return self.pairs.shape[0]


def _wrap(angle):
    return math.pi if angle <= -math.pi else angle


def _azimuth(v, axis, ref):
    """Signed angle of ``v`` around ``axis`` from ``ref``; None if undefined."""
    u = axis / np.linalg.norm(axis)
    v_p = v - np.dot(v, u) * u
    r_p = ref - np.dot(ref, u) * u
    if np.linalg.norm(v_p) < DEGENERATE_EPS or np.linalg.norm(r_p) < DEGENERATE_EPS:
        return None
    return _wrap(math.atan2(np.dot(u, np.cross(r_p, v_p)), np.dot(r_p, v_p)))


def _dihedral(p0, p1, p2, p3):
    b0 = p0 - p1
    b1 = p2 - p1
    b2 = p3 - p2
    norm = np.linalg.norm(b1)
    if norm < DEGENERATE_EPS:
        return None
    b1 = b1 / norm
    v = b0 - np.dot(b0, b1) * b1
    w = b2 - np.dot(b2, b1) * b1
    if np.linalg.norm(v) < DEGENERATE_EPS or np.linalg.norm(w) < DEGENERATE_EPS:
        return None
    return _wrap(math.atan2(np.dot(np.cross(b1, v), w), np.dot(v, w)))


def local_frames(graph, coords):
    """(first, second) reference atoms per atom, -1 where missing."""
    n = graph.num_atoms
    first = np.full(n, -1, dtype=np.int64)
    second = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        dist = np.sqrt(np.sum(np.square(coords - coords[i]), -1))
        bonded = sorted((dist[j], j) for j, _ in graph.neighbors(i))
        if not bonded:
            continue
        first[i] = bonded[0][1]
        if len(bonded) > 1:
            second[i] = bonded[1][1]
        else:
            others = sorted((dist[j], j) for j in range(n) if j != i and j != first[i])
            if others:
                second[i] = others[0][1]
    return first, second


def geo_features(graph, conformer):
    """Features (d, theta, phi, tau) for every ordered bonded pair.

    Degenerate frames (collinear references, missing second reference) give
    phi or tau = 0 and set the pair's ``degenerate`` flag.

    Args:
        graph (MolGraph or str): molecule.
        conformer (Conformer): coordinates bound to ``graph``.

    Returns:
        GeoFeatures

    """
    graph = parse_smiles(graph)
    if graph.num_atoms != len(conformer):
        raise ConformerError('Conformer has {:d} atoms, molecule has {:d}'.format(len(conformer), graph.num_atoms))
    coords = conformer.coords
    first, second = local_frames(graph, coords)

    pairs, d, theta, phi, tau, degenerate = [], [], [], [], [], []
    for i in range(graph.num_atoms):
        for j, _ in graph.neighbors(i):
            v = coords[j] - coords[i]
            a = coords[first[i]] - coords[i]
            dist = float(np.linalg.norm(v))
            if dist <= 0.0:
                raise ConformerError('Bonded atoms {:d} and {:d} share a position'.format(i, j))
            flag = False

            th = math.atan2(np.linalg.norm(np.cross(v, a)), np.dot(v, a))

            if j == first[i]:
                ph = 0.0
            else:
                ph = None if second[i] < 0 else _azimuth(v, a, coords[second[i]] - coords[i])
                if ph is None:
                    ph, flag = 0.0, True

            ref_i = second[i] if first[i] == j else first[i]
            ref_j = second[j] if first[j] == i else first[j]
            ta = None
            if ref_i >= 0 and ref_j >= 0:
                ta = _dihedral(coords[ref_j], coords[j], coords[i], coords[ref_i])
            if ta is None:
                ta, flag = 0.0, True

            pairs.append((i, j))
            d.append(dist)
            theta.append(th)
            phi.append(ph)
            tau.append(ta)
            degenerate.append(flag)

    return GeoFeatures(pairs=np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
                       d=np.asarray(d, dtype=np.float64),
                       theta=np.asarray(theta, dtype=np.float64),
                       phi=np.asarray(phi, dtype=np.float64),
                       tau=np.asarray(tau, dtype=np.float64),
                       degenerate=np.asarray(degenerate, dtype=bool),
                       first=first,
                       second=second)


def lift_features(geo, num_frequencies=NUM_FREQUENCIES):
    """Sinusoidal lift of (d, theta, phi, tau) to a fixed-width feature vector.

    Distances use geometrically spaced frequencies, angles integer harmonics.

    Returns:
        np.ndarray: (E, 8 * num_frequencies) float64.

    """
    freq_d = np.geomspace(0.25, 16.0, num_frequencies)
    harmonics = np.arange(1, num_frequencies + 1, dtype=np.float64)
    parts = []
    for values, freqs in ((geo.d, freq_d), (geo.theta, harmonics), (geo.phi, harmonics), (geo.tau, harmonics)):
        arg = values[:, None] * freqs[None, :]
        parts.append(np.sin(arg))
        parts.append(np.cos(arg))
    return np.concatenate(parts, axis=1).reshape(-1, 8 * num_frequencies)
