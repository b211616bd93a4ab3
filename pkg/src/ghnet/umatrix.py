"""U-matrix of a trained codebook and cluster extraction from it."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .som import SomMap, SomTopology, Topology


@dataclass(frozen=True)
class UMatrix:
    topology: SomTopology
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.topology.n_units,):
            raise ValueError("one U-value per unit expected")
        if np.any(v < 0):
            raise ValueError("U-values must be non-negative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def grid(self) -> np.ndarray:
        """Values as a (height, width) array."""
        return self.values.reshape(self.topology.height, self.topology.width)


@dataclass(frozen=True)
class ClusterAssignment:
    ids: np.ndarray  # per unit; -1 marks boundary units
    n_clusters: int

    def sizes(self) -> list[int]:
        return [int(np.sum(self.ids == k)) for k in range(self.n_clusters)]

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.ids == k)


def immediate_neighbors(topology: SomTopology, i: int) -> list[int]:
    col, row = topology.col_row(i)
    w, h = topology.width, topology.height
    if topology.kind is Topology.RECTANGULAR:
        cand = [(col, row - 1), (col - 1, row), (col + 1, row), (col, row + 1)]
    else:
        # odd rows are shifted right, so their diagonal neighbors lie at col and col+1
        lo = col if row % 2 else col - 1
        cand = [(lo, row - 1), (lo + 1, row - 1), (col - 1, row), (col + 1, row),
                (lo, row + 1), (lo + 1, row + 1)]
    return [r * w + c for c, r in cand if 0 <= c < w and 0 <= r < h]


def compute_umatrix(som: SomMap) -> UMatrix:
    topo = som.topology
    cb = som.codebook
    values = np.zeros(topo.n_units)
    for i in range(topo.n_units):
        nb = immediate_neighbors(topo, i)
        if nb:
            values[i] = np.linalg.norm(cb[nb] - cb[i], axis=1).mean()
    return UMatrix(topo, values)


def extract_clusters(u: UMatrix, quantile: float = 0.5) -> ClusterAssignment:
    """Threshold the U-matrix at a quantile and label connected low regions.

    Units at or below the threshold are foreground. Foreground components
    (over immediate neighbors) become clusters numbered by decreasing
    size, ties by lowest member index. Other units get -1.
    """
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    topo = u.topology
    threshold = np.quantile(u.values, quantile)
    fg = u.values <= threshold
    comp = np.full(topo.n_units, -1)
    components = []
    for start in range(topo.n_units):
        if not fg[start] or comp[start] >= 0:
            continue
        label = len(components)
        comp[start] = label
        members = [start]
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for nb in immediate_neighbors(topo, cur):
                if fg[nb] and comp[nb] < 0:
                    comp[nb] = label
                    members.append(nb)
                    queue.append(nb)
        components.append(members)
    # components are discovered in order of their lowest member
    order = sorted(range(len(components)), key=lambda k: -len(components[k]))
    ids = np.full(topo.n_units, -1)
    for new, old in enumerate(order):
        ids[components[old]] = new
    return ClusterAssignment(ids, len(components))


def export_pgm(u: UMatrix) -> bytes:
    """Binary greyscale image, min-max scaled to 0..255, row-major."""
    v = u.values
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        pix = np.rint((v - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        pix = np.zeros(v.shape, dtype=np.uint8)
    header = f"P5 {u.topology.width} {u.topology.height} 255\n".encode("ascii")
    return header + pix.tobytes()


def write_umatrix_csv(u: UMatrix, clusters: ClusterAssignment, path: str | Path) -> None:
    w = u.topology.width
    with Path(path).open("w") as fh:
        fh.write("col,row,u_value,cluster_id\n")
        for i, (val, cid) in enumerate(zip(u.values, clusters.ids)):
            fh.write(f"{i % w},{i // w},{float(val)!r},{int(cid)}\n")
