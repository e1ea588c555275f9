"""Shared test helpers: exact nearest-neighbour search and angle math."""

from collections import defaultdict

import numpy as np


def chord_to_degrees(chord: float) -> float:
    return float(np.degrees(2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))))


def angle_degrees(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def brute_force_max_nn_gap(points: np.ndarray) -> float:
    """Max nearest-neighbour angle (degrees) by exhaustive pairwise search."""
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    worst_chord = float(np.sqrt(d2.min(axis=1)).max())
    return chord_to_degrees(worst_chord)


def grid_max_nn_gap(points: np.ndarray, cell: float = 0.05) -> float:
    """Max nearest-neighbour angle (degrees) by grid-accelerated exact search.

    Points are bucketed into cubic cells of edge ``cell``; each point's
    nearest neighbour is found among the 27 surrounding cells. The result
    is exact whenever every nearest-neighbour chord is below ``cell``,
    which is asserted.
    """
    pts = np.asarray(points, dtype=float)
    keys = np.floor((pts + 1.5) / cell).astype(np.int64)
    buckets: dict[tuple, list] = defaultdict(list)
    for i, key in enumerate(map(tuple, keys)):
        buckets[key].append(i)
    arrays = {k: np.array(v) for k, v in buckets.items()}

    worst_chord = 0.0
    for key, idx in arrays.items():
        neighbourhoods = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    other = (key[0] + dx, key[1] + dy, key[2] + dz)
                    if other in arrays:
                        neighbourhoods.append(arrays[other])
        cand = np.concatenate(neighbourhoods)
        d2 = ((pts[idx][:, None, :] - pts[cand][None, :, :]) ** 2).sum(-1)
        d2[idx[:, None] == cand[None, :]] = np.inf
        best = np.sqrt(d2.min(axis=1))
        assert best.max() < cell, "cell too small for exact grid search"
        worst_chord = max(worst_chord, float(best.max()))
    return chord_to_degrees(worst_chord)
