"""End-to-end experiments: direct MLP, SOM on ON events, and the SOM-then-MLP hybrid.

Every experiment takes one integer seed per stage config and fans it out
to named sub-seeds with :func:`derive_seed`, so an experiment is fully
determined by its data, configs and seeds.
"""
from __future__ import annotations

import logging
import time
import zlib
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from . import mlp, som
from .data import Dataset, Label, Normalizer, apply_normalizer, fit_normalizer, split_half
from .mlp import MlpLayout, MlpNetwork, MlpTrainConfig, TrainRecordMlp
from .som import SomMap, SomTopology, SomTrainConfig, SomTrainRecord
from .umatrix import ClusterAssignment, UMatrix, compute_umatrix, extract_clusters

log = logging.getLogger(__name__)


class HybridError(RuntimeError):
    pass


def derive_seed(seed: int, name: str) -> int:
    """Sub-seed for stage ``name``: first word of SeedSequence([seed, crc32(name)])."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True)
class ConfusionMatrix:
    true_gamma_pred_gamma: int = 0
    true_gamma_pred_hadron: int = 0
    true_hadron_pred_gamma: int = 0
    true_hadron_pred_hadron: int = 0

    @property
    def total(self) -> int:
        return (self.true_gamma_pred_gamma + self.true_gamma_pred_hadron
                + self.true_hadron_pred_gamma + self.true_hadron_pred_hadron)

    @property
    def accuracy(self) -> float:
        return (self.true_gamma_pred_gamma + self.true_hadron_pred_hadron) / self.total

    def to_csv(self) -> str:
        return ("true_class,pred_gamma,pred_hadron\n"
                f"gamma,{self.true_gamma_pred_gamma},{self.true_gamma_pred_hadron}\n"
                f"hadron,{self.true_hadron_pred_gamma},{self.true_hadron_pred_hadron}\n")


@dataclass(frozen=True)
class OutputHistogram:
    edges: np.ndarray
    gamma_counts: np.ndarray
    hadron_counts: np.ndarray

    def to_csv(self) -> str:
        rows = ["bin_low,bin_high,gamma_count,hadron_count"]
        for k in range(len(self.gamma_counts)):
            rows.append(f"{float(self.edges[k])!r},{float(self.edges[k + 1])!r},"
                        f"{int(self.gamma_counts[k])},{int(self.hadron_counts[k])}")
        return "\n".join(rows) + "\n"


def evaluate(net: MlpNetwork, X, y, threshold: float = 0.5) -> ConfusionMatrix:
    """Confusion counts; ``y`` holds targets (1 gamma, 0 hadron)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    out, _ = mlp.forward_batch(net, X)
    pred_gamma = out >= threshold
    is_gamma = y == 1.0
    return ConfusionMatrix(
        int(np.sum(is_gamma & pred_gamma)),
        int(np.sum(is_gamma & ~pred_gamma)),
        int(np.sum(~is_gamma & pred_gamma)),
        int(np.sum(~is_gamma & ~pred_gamma)),
    )


def output_histogram(net: MlpNetwork, X, y, n_bins: int = 50) -> OutputHistogram:
    """Raw outputs binned per class over [min output, max output].

    Bins are half-open except the last, which includes the maximum. If
    every output is equal, all events land in the first bin.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ValueError("cannot histogram an empty test set")
    out, _ = mlp.forward_batch(net, X)
    y = np.asarray(y, dtype=float)
    lo, hi = float(out.min()), float(out.max())
    edges = np.linspace(lo, hi, n_bins + 1)
    if hi > lo:
        idx = np.floor((out - lo) / (hi - lo) * n_bins).astype(int)
        idx = np.clip(idx, 0, n_bins - 1)
    else:
        idx = np.zeros(len(out), dtype=int)
    gamma = np.bincount(idx[y == 1.0], minlength=n_bins)
    hadron = np.bincount(idx[y != 1.0], minlength=n_bins)
    return OutputHistogram(edges, gamma, hadron)


def runs_to_threshold(curve: list[TrainRecordMlp], threshold: float) -> int | None:
    """Number of runs until the test error first drops to ``threshold``."""
    for r in curve:
        if r.test_error <= threshold:
            return r.run_index + 1
    return None


@dataclass
class MlpExperiment:
    net: MlpNetwork
    normalizer: Normalizer
    curve: list[TrainRecordMlp]
    confusion: ConfusionMatrix
    histogram: OutputHistogram
    train_size: int
    seconds: float


def _halves(gamma: Dataset, hadron: Dataset, seed: int):
    if len(gamma) == 0 or len(hadron) == 0:
        raise ValueError("both gamma and hadron datasets must be non-empty")
    g_tr, g_te = split_half(gamma, derive_seed(seed, "split-gamma"))
    h_tr, h_te = split_half(hadron, derive_seed(seed, "split-hadron"))
    Xtr = np.vstack([g_tr.feature_matrix(), h_tr.feature_matrix()])
    ytr = np.concatenate([np.ones(len(g_tr)), np.zeros(len(h_tr))])
    Xte = np.vstack([g_te.feature_matrix(), h_te.feature_matrix()])
    yte = np.concatenate([np.ones(len(g_te)), np.zeros(len(h_te))])
    return Xtr, ytr, Xte, yte


def run_mlp_experiment(gamma: Dataset, hadron: Dataset, cfg: MlpTrainConfig,
                       layout: MlpLayout = MlpLayout(), threshold: float = 0.5,
                       n_bins: int = 50) -> MlpExperiment:
    """Train on half of each class, test on the other half."""
    seed = cfg.seed
    Xtr, ytr, Xte, yte = _halves(gamma, hadron, seed)
    norm = fit_normalizer(Xtr)
    Xtr, Xte = apply_normalizer(norm, Xtr), apply_normalizer(norm, Xte)
    net0 = mlp.init_network(layout, derive_seed(seed, "mlp-init"))
    start = time.perf_counter()
    net, curve = mlp.train(net0, (Xtr, ytr), (Xte, yte),
                           replace(cfg, seed=derive_seed(seed, "mlp-train")))
    seconds = time.perf_counter() - start
    return MlpExperiment(net, norm, curve, evaluate(net, Xte, yte, threshold),
                         output_histogram(net, Xte, yte, n_bins), len(Xtr), seconds)


@dataclass
class SomExperiment:
    som: SomMap
    normalizer: Normalizer
    umatrix: UMatrix
    clusters: ClusterAssignment
    curve: list[SomTrainRecord]
    initial_qe: float

    @property
    def final_qe(self) -> float:
        return self.curve[-1].quantization_error if self.curve else self.initial_qe


def run_som_experiment(on_events: Dataset | np.ndarray, topology: SomTopology,
                       cfg: SomTrainConfig, quantile: float = 0.5) -> SomExperiment:
    """Range-normalize, initialize, train, then U-matrix and clusters.

    Only feature values are read; labels play no part.
    """
    X = on_events.feature_matrix() if isinstance(on_events, Dataset) else np.asarray(on_events, float)
    if len(X) == 0:
        raise ValueError("ON dataset is empty")
    norm = fit_normalizer(X)
    Xn = apply_normalizer(norm, X)
    m0 = som.init_map(topology, Xn, derive_seed(cfg.seed, "som-init"))
    qe0 = som.quantization_error(m0, Xn)
    trained, curve = som.train(m0, Xn, replace(cfg, seed=derive_seed(cfg.seed, "som-train")))
    u = compute_umatrix(trained)
    return SomExperiment(trained, norm, u, extract_clusters(u, quantile), curve, qe0)


def label_clusters(som_map: SomMap, clusters: ClusterAssignment, X, labels) -> dict[int, Label]:
    """Majority class of calibration hits per cluster.

    Ties and clusters without hits get ``Label.UNKNOWN``. Hits on boundary
    units are ignored.
    """
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ValueError("calibration set is empty")
    hits = {k: Counter() for k in range(clusters.n_clusters)}
    for unit, lab in zip(som.bmu_indices(som_map, X), labels):
        cid = int(clusters.ids[unit])
        if cid >= 0:
            hits[cid][Label(lab)] += 1
    result = {}
    for k, c in hits.items():
        g, h = c[Label.GAMMA], c[Label.HADRON]
        result[k] = Label.GAMMA if g > h else Label.HADRON if h > g else Label.UNKNOWN
    return result


@dataclass
class HybridExperiment:
    net: MlpNetwork
    normalizer: Normalizer
    curve: list[TrainRecordMlp]
    confusion: ConfusionMatrix
    som: SomExperiment
    cluster_labels: dict[int, Label]
    training_set_size: int
    codebook_size: int
    calibration_size: int
    som_seconds: float
    mlp_seconds: float


def run_hybrid_experiment(gamma: Dataset, hadron: Dataset, on_events: Dataset,
                          topology: SomTopology, som_cfg: SomTrainConfig,
                          mlp_cfg: MlpTrainConfig, layout: MlpLayout = MlpLayout(),
                          calib_fraction: float = 0.1, quantile: float = 0.5,
                          threshold: float = 0.5) -> HybridExperiment:
    """SOM on unlabeled ON events, clusters named from a small labeled
    calibration sample, then an MLP trained on the labeled codebook vectors.

    Train/test halves use the same sub-seeds as :func:`run_mlp_experiment`
    with ``mlp_cfg.seed``, so both see identical test events.
    """
    if len(on_events) == 0:
        raise ValueError("ON dataset is empty")
    if not 0.0 < calib_fraction <= 1.0:
        raise ValueError("calib_fraction must lie in (0, 1]")
    seed = mlp_cfg.seed
    Xtr, ytr, Xte, yte = _halves(gamma, hadron, seed)

    start = time.perf_counter()
    som_exp = run_som_experiment(on_events, topology, som_cfg, quantile)
    som_seconds = time.perf_counter() - start
    norm = som_exp.normalizer

    rng = np.random.default_rng(derive_seed(seed, "calibration"))
    n_cal = max(1, int(round(calib_fraction * len(Xtr))))
    pick = np.sort(rng.choice(len(Xtr), size=n_cal, replace=False))
    cal_labels = [Label.GAMMA if t == 1.0 else Label.HADRON for t in ytr[pick]]
    names = label_clusters(som_exp.som, som_exp.clusters, apply_normalizer(norm, Xtr[pick]), cal_labels)
    known = {k: v for k, v in names.items() if v is not Label.UNKNOWN}
    if not known:
        raise HybridError(
            f"none of the {som_exp.clusters.n_clusters} clusters received a calibration label"
        )
    if len(set(known.values())) < 2:
        log.warning("all labeled clusters share one class: %s", next(iter(known.values())).value)

    units = [u for u in range(topology.n_units) if int(som_exp.clusters.ids[u]) in known]
    Xh = som_exp.som.codebook[units]
    yh = np.array([known[int(som_exp.clusters.ids[u])].target for u in units])
    Xte_n = apply_normalizer(norm, Xte)
    net0 = mlp.init_network(layout, derive_seed(seed, "mlp-init"))
    start = time.perf_counter()
    net, curve = mlp.train(net0, (Xh, yh), (Xte_n, yte),
                           replace(mlp_cfg, seed=derive_seed(seed, "mlp-train")))
    mlp_seconds = time.perf_counter() - start
    return HybridExperiment(net, norm, curve, evaluate(net, Xte_n, yte, threshold), som_exp,
                            names, len(Xh), topology.n_units, n_cal, som_seconds, mlp_seconds)


def comparison_report(hybrid: HybridExperiment, direct: MlpExperiment,
                      error_threshold: float) -> dict:
    """Deterministic summary of hybrid vs direct training (no wall-clock)."""
    return {
        "error_threshold": error_threshold,
        "hybrid": {
            "runs": len(hybrid.curve),
            "runs_to_threshold": runs_to_threshold(hybrid.curve, error_threshold),
            "training_set_size": hybrid.training_set_size,
            "codebook_size": hybrid.codebook_size,
            "calibration_size": hybrid.calibration_size,
            "n_clusters": hybrid.som.clusters.n_clusters,
            "cluster_labels": {str(k): v.value for k, v in sorted(hybrid.cluster_labels.items())},
            "test_accuracy": hybrid.confusion.accuracy,
            "final_test_error": hybrid.curve[-1].test_error if hybrid.curve else None,
        },
        "direct": {
            "runs": len(direct.curve),
            "runs_to_threshold": runs_to_threshold(direct.curve, error_threshold),
            "training_set_size": direct.train_size,
            "test_accuracy": direct.confusion.accuracy,
            "final_test_error": direct.curve[-1].test_error if direct.curve else None,
        },
        "training_set_bounded_by_codebook": hybrid.training_set_size <= hybrid.codebook_size,
    }
