"""Online self-organizing map with gaussian and cut-gaussian neighborhoods.

Units are indexed row-major: unit ``row * width + col``. On the
hexagonal lattice odd rows are shifted right by half a unit and rows
are ``sqrt(3)/2`` apart, so all six neighbors of a unit sit at planar
distance 1.

The gaussian kernel is ``exp(-d**2 / (2 sigma**2))``. A positive exponent
would grow with distance, which is not a neighborhood.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np

# gaussian weights below this are not applied
KERNEL_SKIP = 1e-12
HEX_ROW_SPACING = math.sqrt(3.0) / 2.0


class Topology(enum.Enum):
    RECTANGULAR = "rectangular"
    HEXAGONAL = "hexagonal"


class Kernel(enum.Enum):
    GAUSSIAN = "gaussian"
    CUTGAUSSIAN = "cutgaussian"


@dataclass(frozen=True)
class SomTopology:
    kind: Topology
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Topology(self.kind))
        if self.width < 1 or self.height < 1:
            raise ValueError("map width and height must be at least 1")

    @property
    def n_units(self) -> int:
        return self.width * self.height

    def _check(self, index: int) -> None:
        if not 0 <= index < self.n_units:
            raise IndexError(f"unit {index} outside map of {self.n_units} units")

    def col_row(self, index: int) -> tuple[int, int]:
        self._check(index)
        return index % self.width, index // self.width

    @cached_property
    def positions(self) -> np.ndarray:
        """(n_units, 2) planar coordinates of every unit."""
        idx = np.arange(self.n_units)
        col = (idx % self.width).astype(float)
        row = (idx // self.width).astype(float)
        if self.kind is Topology.HEXAGONAL:
            col = col + 0.5 * (row % 2)
            row = row * HEX_ROW_SPACING
        return np.column_stack([col, row])

    @cached_property
    def distances(self) -> np.ndarray:
        """(n_units, n_units) lattice distances."""
        p = self.positions
        diff = p[:, None, :] - p[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=-1))


def grid_position(topology: SomTopology, index: int) -> tuple[float, float]:
    col, row = topology.col_row(index)
    if topology.kind is Topology.HEXAGONAL:
        return col + 0.5 * (row % 2), row * HEX_ROW_SPACING
    return float(col), float(row)


def grid_distance(topology: SomTopology, i: int, j: int) -> float:
    xi, yi = grid_position(topology, i)
    xj, yj = grid_position(topology, j)
    return math.hypot(xi - xj, yi - yj)


@dataclass(frozen=True)
class SomMap:
    topology: SomTopology
    codebook: np.ndarray

    def __post_init__(self):
        cb = np.array(self.codebook, dtype=float)
        if cb.ndim != 2 or cb.shape[0] != self.topology.n_units:
            raise ValueError(
                f"codebook shape {cb.shape} does not fit a map of {self.topology.n_units} units"
            )
        if not np.all(np.isfinite(cb)):
            raise ValueError("codebook has non-finite entries")
        cb.flags.writeable = False
        object.__setattr__(self, "codebook", cb)

    @property
    def dim(self) -> int:
        return self.codebook.shape[1]


def init_map(topology: SomTopology, data, seed: int) -> SomMap:
    """Each unit copies a data vector sampled uniformly with replacement."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or len(data) == 0:
        raise ValueError("init_map needs a non-empty (N, dim) array")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(data), size=topology.n_units)
    return SomMap(topology, data[picks])


def find_bmu(som: SomMap, x) -> int:
    """Index of the unit nearest to ``x``; ties go to the lowest index."""
    x = np.asarray(x, dtype=float)
    if x.shape != (som.dim,):
        raise ValueError(f"input dimension {x.shape} does not match codebook dimension {som.dim}")
    d2 = ((som.codebook - x) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def kernel_gaussian(d, sigma: float):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    d = np.asarray(d, dtype=float)
    out = np.exp(-(d * d) / (2.0 * sigma * sigma))
    return out if out.ndim else float(out)


def kernel_cutgaussian(d, sigma: float):
    """Gaussian restricted to the closed ball d <= sigma."""
    g = kernel_gaussian(d, sigma)
    out = np.where(np.asarray(d) <= sigma, g, 0.0)
    return out if out.ndim else float(out)


def kernel_weights(kernel: Kernel, d, sigma: float) -> np.ndarray:
    """Kernel weights with units outside the neighborhood set zeroed."""
    if Kernel(kernel) is Kernel.GAUSSIAN:
        h = np.asarray(kernel_gaussian(d, sigma))
        return np.where(h >= KERNEL_SKIP, h, 0.0)
    return np.asarray(kernel_cutgaussian(d, sigma))


def update_step(som: SomMap, x, alpha: float, sigma: float, kernel: Kernel) -> SomMap:
    """One online update toward ``x``.

    Units with nonzero kernel weight ``h`` move to ``(1 - a*h) m + a*h x``
    with ``a = alpha``; the rest keep their vectors.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    x = np.asarray(x, dtype=float)
    c = find_bmu(som, x)
    k = alpha * kernel_weights(kernel, som.topology.distances[c], sigma)
    cb = som.codebook.copy()
    moved = k > 0
    cb[moved] = (1.0 - k[moved, None]) * cb[moved] + k[moved, None] * x
    return SomMap(som.topology, cb)


def quantization_error(som: SomMap, data) -> float:
    """Mean distance from each data vector to its best matching unit."""
    data = np.ascontiguousarray(data, dtype=float)
    if data.ndim != 2 or len(data) == 0:
        raise ValueError("quantization_error needs a non-empty (N, dim) array")
    if data.shape[1] != som.dim:
        raise ValueError("data dimension does not match codebook dimension")
    return float(_qe(np.ascontiguousarray(som.codebook), data))


def bmu_indices(som: SomMap, data) -> np.ndarray:
    data = np.ascontiguousarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != som.dim:
        raise ValueError("data dimension does not match codebook dimension")
    return _bmus(np.ascontiguousarray(som.codebook), data)


@dataclass(frozen=True)
class SomTrainConfig:
    kernel: Kernel = Kernel.GAUSSIAN
    epochs: int = 300
    alpha0: float = 0.5
    alpha_final: float = 0.01
    sigma0: float | None = None  # None: max(width, height) / 2
    sigma_final: float = 0.2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0 < self.alpha0 <= 1 or self.alpha_final < 0 or self.alpha_final > self.alpha0:
            raise ValueError("need 0 <= alpha_final <= alpha0 <= 1 and alpha0 > 0")
        if self.sigma_final <= 0:
            raise ValueError("sigma_final must be positive")
        if self.sigma0 is not None and self.sigma0 < self.sigma_final:
            raise ValueError("sigma0 must be at least sigma_final")

    def resolved_sigma0(self, topology: SomTopology) -> float:
        if self.sigma0 is not None:
            return float(self.sigma0)
        return max(max(topology.width, topology.height) / 2.0, self.sigma_final)


@dataclass(frozen=True)
class SomTrainRecord:
    epoch: int
    quantization_error: float


def schedule(start: float, end: float, t: int, total: int) -> float:
    """Linear interpolation from ``start`` at t=0 to ``end`` at t=total-1."""
    if total <= 1:
        return start
    return start + (end - start) * (t / (total - 1))


def train(som: SomMap, data, cfg: SomTrainConfig):
    """Online training; one epoch is ``len(data)`` updates with inputs drawn
    uniformly at random (with replacement).

    Learning rate and radius fall linearly over all steps of the session.
    Returns the trained map and one quantization-error record per epoch.
    """
    data = np.ascontiguousarray(data, dtype=float)
    if data.ndim != 2 or len(data) == 0:
        raise ValueError("training needs a non-empty (N, dim) array")
    if data.shape[1] != som.dim:
        raise ValueError("data dimension does not match codebook dimension")
    topo = som.topology
    n = len(data)
    total = cfg.epochs * n
    sigma0 = cfg.resolved_sigma0(topo)
    rng = np.random.default_rng(cfg.seed)
    cb = np.array(som.codebook, dtype=float, order="C")
    dist = np.ascontiguousarray(topo.distances)
    cut = cfg.kernel is Kernel.CUTGAUSSIAN
    records = []
    for epoch in range(cfg.epochs):
        picks = rng.integers(0, n, size=n)
        _train_epoch(cb, data, picks, dist, epoch * n, total,
                     cfg.alpha0, cfg.alpha_final, sigma0, cfg.sigma_final, cut)
        records.append(SomTrainRecord(epoch, float(_qe(cb, data))))
    return SomMap(topo, cb), records


@numba.njit(cache=True)
def _bmu(cb, x):
    best = 0
    best_d = np.inf
    for u in range(cb.shape[0]):
        s = 0.0
        for j in range(cb.shape[1]):
            diff = x[j] - cb[u, j]
            s += diff * diff
        if s < best_d:
            best_d = s
            best = u
    return best, best_d


@numba.njit(cache=True)
def _bmus(cb, data):
    out = np.empty(data.shape[0], dtype=np.int64)
    for i in range(data.shape[0]):
        out[i] = _bmu(cb, data[i])[0]
    return out


@numba.njit(cache=True)
def _qe(cb, data):
    total = 0.0
    for i in range(data.shape[0]):
        total += np.sqrt(_bmu(cb, data[i])[1])
    return total / data.shape[0]


@numba.njit(cache=True)
def _train_epoch(cb, data, picks, dist, t0, total, alpha0, alpha1, sigma0, sigma1, cut):
    dim = cb.shape[1]
    for s in range(picks.shape[0]):
        t = t0 + s
        frac = t / (total - 1) if total > 1 else 0.0
        alpha = alpha0 + (alpha1 - alpha0) * frac
        sigma = sigma0 + (sigma1 - sigma0) * frac
        x = data[picks[s]]
        c = _bmu(cb, x)[0]
        two_s2 = 2.0 * sigma * sigma
        for u in range(cb.shape[0]):
            d = dist[c, u]
            if cut and d > sigma:
                continue
            h = np.exp(-(d * d) / two_s2)
            if not cut and h < 1e-12:
                continue
            k = alpha * h
            for j in range(dim):
                cb[u, j] = (1.0 - k) * cb[u, j] + k * x[j]
