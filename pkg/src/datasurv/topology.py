"""Random geometric k-nearest-neighbour graphs on the unit square."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from datasurv.errors import InvalidParameterError


@dataclass(frozen=True, eq=False)
class Topology:
    """Symmetrised k-NN graph.

    ``neighbors[v]`` lists the neighbours of ``v`` ordered by increasing
    distance (ties by index), padded with -1 up to the maximum degree.
    """

    positions: np.ndarray
    neighbors: np.ndarray
    degree: np.ndarray
    k: int

    @property
    def n(self) -> int:
        return len(self.positions)

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[v, : self.degree[v]]

    def edge_set(self) -> set[tuple[int, int]]:
        rows, cols = np.nonzero(self.neighbors >= 0)
        return set(zip(rows.tolist(), self.neighbors[rows, cols].tolist()))


def build_topology(n: int, k_topology: int, seed=None) -> Topology:
    """Scatter ``n`` points uniformly and connect each to its ``k_topology`` nearest.

    The directed k-NN relation is symmetrised, so every node ends up with at
    least ``k_topology`` neighbours. Same seed, same graph.
    """
    if k_topology < 1:
        raise InvalidParameterError("k_topology", f"must be >= 1, got {k_topology!r}")
    if n < k_topology + 1:
        raise InvalidParameterError("n", f"need n >= k_topology + 1 = {k_topology + 1}, got {n!r}")

    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2))
    _, idx = cKDTree(pos).query(pos, k=k_topology + 1)
    idx = np.asarray(idx).reshape(n, k_topology + 1)

    src = np.repeat(np.arange(n), k_topology + 1)
    dst = idx.ravel()
    keep = src != dst
    src, dst = src[keep], dst[keep]
    # both directions, deduplicated
    pairs = np.unique(np.concatenate([src * n + dst, dst * n + src]))
    rows, cols = pairs // n, pairs % n
    dist = np.hypot(*(pos[rows] - pos[cols]).T)
    order = np.lexsort((cols, dist, rows))
    rows, cols = rows[order], cols[order]

    degree = np.bincount(rows, minlength=n)
    start = np.concatenate([[0], np.cumsum(degree)[:-1]])
    slot = np.arange(len(rows)) - start[rows]
    neighbors = np.full((n, int(degree.max())), -1, dtype=np.int64)
    neighbors[rows, slot] = cols
    return Topology(positions=pos, neighbors=neighbors, degree=degree, k=int(k_topology))
