"""Synthetic stand-in for simulated gamma, hadron and ON event files.

Each class is an axis-aligned normal in the ten image parameters. The
default means overlap partially, roughly one standard deviation apart
per feature, which leaves a few percent irreducible error. fEner and
fTheta are constants.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, EventRecord, Label, N_FEATURES, save_dataset

N_GAMMA = 12332
N_HADRON = 6688
N_ON = 7356

#                          fLength fWidth fSize fConc fConc1 fAsym fM3Long fM3Trans fAlpha fDist
GAMMA_MEAN = (30.0, 12.0, 2.70, 0.40, 0.22, 10.0, 12.0, 0.0, 12.0, 180.0)
HADRON_MEAN = (55.0, 24.0, 3.00, 0.32, 0.17, -10.0, -5.0, 0.0, 40.0, 215.0)
FEATURE_STD = (20.0, 10.0, 0.35, 0.08, 0.05, 20.0, 18.0, 10.0, 20.0, 60.0)


def _vec(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class SynthConfig:
    n_gamma: int = N_GAMMA
    n_hadron: int = N_HADRON
    n_on: int = N_ON
    on_gamma_fraction: float = 0.5
    gamma_mean: tuple[float, ...] = GAMMA_MEAN
    hadron_mean: tuple[float, ...] = HADRON_MEAN
    gamma_std: tuple[float, ...] = FEATURE_STD
    hadron_std: tuple[float, ...] = FEATURE_STD
    energy: float = 2.0  # log10(GeV)
    theta: float = 0.3  # rad
    seed: int = 0

    def __post_init__(self):
        for name in ("gamma_mean", "hadron_mean", "gamma_std", "hadron_std"):
            v = _vec(getattr(self, name))
            if len(v) != N_FEATURES:
                raise ValueError(f"{name} needs {N_FEATURES} components")
            object.__setattr__(self, name, v)
        if min(self.gamma_std + self.hadron_std) <= 0:
            raise ValueError("standard deviations must be positive")
        if self.n_gamma < 1 or self.n_hadron < 1 or self.n_on < 0:
            raise ValueError("event counts must be positive")
        if not 0.0 <= self.on_gamma_fraction <= 1.0:
            raise ValueError("on_gamma_fraction must lie in [0, 1]")

    @classmethod
    def separated(cls, n_sigma: float, **kw) -> "SynthConfig":
        """Hadron means shifted ``n_sigma`` standard deviations from gamma on every feature."""
        std = _vec(kw.pop("gamma_std", FEATURE_STD))
        gmean = _vec(kw.pop("gamma_mean", GAMMA_MEAN))
        hmean = tuple(m + n_sigma * s for m, s in zip(gmean, std))
        return cls(gamma_mean=gmean, hadron_mean=hmean, gamma_std=std, hadron_std=std, **kw)


@dataclass(frozen=True)
class SynthOutput:
    gamma: Dataset
    hadron: Dataset
    on: Dataset
    on_truth: tuple[Label, ...] = field(default=())


def _draw(rng, n, mean, std, label, cfg):
    x = rng.normal(mean, std, size=(n, N_FEATURES))
    tail = (cfg.energy, cfg.theta)
    return [EventRecord(*row, *tail, label=label) for row in x.tolist()]


def synth_generate(cfg: SynthConfig) -> SynthOutput:
    """Draw gamma, hadron and ON events.

    ON events are fresh draws from both classes, shuffled, stored
    unlabeled; their true classes come back separately in ``on_truth``.
    """
    rng = np.random.default_rng(cfg.seed)
    gamma = _draw(rng, cfg.n_gamma, cfg.gamma_mean, cfg.gamma_std, Label.GAMMA, cfg)
    hadron = _draw(rng, cfg.n_hadron, cfg.hadron_mean, cfg.hadron_std, Label.HADRON, cfg)
    n_on_gamma = int(round(cfg.on_gamma_fraction * cfg.n_on))
    on = (_draw(rng, n_on_gamma, cfg.gamma_mean, cfg.gamma_std, Label.GAMMA, cfg)
          + _draw(rng, cfg.n_on - n_on_gamma, cfg.hadron_mean, cfg.hadron_std, Label.HADRON, cfg))
    order = rng.permutation(len(on))
    on = [on[i] for i in order]
    truth = tuple(r.label for r in on)
    on_unlabeled = [r.with_label(Label.UNKNOWN) for r in on]
    return SynthOutput(
        Dataset(gamma, source="synth:gamma"),
        Dataset(hadron, source="synth:hadron"),
        Dataset(on_unlabeled, source="synth:on"),
        truth,
    )


def write_synth(out: SynthOutput, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    paths = {name: out_dir / f"{name}.txt" for name in ("gamma", "hadron", "on")}
    save_dataset(out.gamma, paths["gamma"])
    save_dataset(out.hadron, paths["hadron"])
    save_dataset(out.on, paths["on"])
    return paths
