"""Command-line front end.

Every command that writes files also writes ``manifest.json`` holding the
resolved arguments; ``ghnet replay manifest.json`` re-runs the command
with exactly those arguments. Only the ``created`` and ``timing`` entries
of a manifest differ between otherwise identical runs.
"""
from __future__ import annotations

import argparse
import datetime
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, formats, pipeline, som
from .data import Label, apply_normalizer, features, load_dataset
from .mlp import Method, MlpLayout, MlpTrainConfig, forward_batch
from .som import Kernel, SomTopology, SomTrainConfig, Topology
from .synth import N_GAMMA, N_HADRON, N_ON, SynthConfig, synth_generate, write_synth
from .umatrix import compute_umatrix, export_pgm, extract_clusters, write_umatrix_csv

log = logging.getLogger("ghnet")

MANIFEST = "manifest.json"


class CommandError(Exception):
    pass


class Outputs:
    """Tracks files written by a command; removes them all if it fails."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.written: list[Path] = []
        self.timing: dict[str, float] = {}

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.written.append(p)
        return p

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        p.write_text(content)
        return p

    def __enter__(self):
        self.dir.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in self.written:
                p.unlink(missing_ok=True)
        return False

    def manifest(self, args: argparse.Namespace, extra: dict | None = None) -> None:
        resolved = {k: v for k, v in vars(args).items() if k != "func"}
        doc = {
            "tool": "ghnet",
            "version": __version__,
            "command": args.command,
            "args": resolved,
            "outputs": sorted(p.name for p in self.written),
            **(extra or {}),
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "timing": self.timing,
        }
        self.text(MANIFEST, json.dumps(doc, indent=2, sort_keys=False) + "\n")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {text}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return v


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CommandError(f"{what} file not found: {p}")
    return p


def _load(path: str, label: Label, what: str):
    ds = load_dataset(_existing(path, what), label)
    if len(ds) == 0:
        raise CommandError(f"{what} file is empty: {path}")
    return ds


def _mlp_cfg(args) -> MlpTrainConfig:
    return MlpTrainConfig(method=Method(args.method), runs=args.runs, eta0=args.eta0,
                          eta_decay=args.eta_decay, armijo_c=args.armijo_c,
                          armijo_shrink=args.armijo_shrink, seed=args.seed)


def _som_cfg(args) -> SomTrainConfig:
    return SomTrainConfig(kernel=Kernel(args.kernel), epochs=args.epochs, alpha0=args.alpha0,
                          alpha_final=args.alpha_final, sigma0=args.sigma0,
                          sigma_final=args.sigma_final, seed=args.seed)


def _topology(args) -> SomTopology:
    return SomTopology(Topology(args.topology), args.width, args.height)


def _sub_seeds(seed: int, names) -> dict[str, int]:
    return {n: pipeline.derive_seed(seed, n) for n in names}


def cmd_synth(args) -> None:
    cfg_kw = dict(n_gamma=args.n_gamma, n_hadron=args.n_hadron, n_on=args.n_on,
                  on_gamma_fraction=args.on_gamma_fraction, seed=args.seed)
    cfg = (SynthConfig.separated(args.separation, **cfg_kw) if args.separation is not None
           else SynthConfig(**cfg_kw))
    out = synth_generate(cfg)
    with Outputs(args.out_dir) as o:
        for name in ("gamma", "hadron", "on"):
            o.path(f"{name}.txt")
        write_synth(out, o.dir)
        o.manifest(args, {"config": asdict(cfg)})


def cmd_train_mlp(args) -> None:
    gamma = _load(args.gamma, Label.GAMMA, "gamma")
    hadron = _load(args.hadron, Label.HADRON, "hadron")
    layout = MlpLayout(10, tuple(args.hidden), 1)
    cfg = _mlp_cfg(args)
    with Outputs(args.out_dir) as o:
        exp = pipeline.run_mlp_experiment(gamma, hadron, cfg, layout, args.threshold, args.bins)
        o.timing["mlp_train_seconds"] = exp.seconds
        formats.save_mlp(o.path("model.txt"), exp.net, exp.normalizer)
        formats.write_error_curve(o.path("error_curve.csv"), exp.curve)
        o.text("confusion.csv", exp.confusion.to_csv())
        o.text("histogram.csv", exp.histogram.to_csv())
        o.manifest(args, {
            "config": {"layout": list(layout.sizes), **asdict(cfg), "method": cfg.method.value},
            "sub_seeds": _sub_seeds(args.seed, ["split-gamma", "split-hadron", "mlp-init", "mlp-train"]),
            "test_accuracy": exp.confusion.accuracy,
        })
    print(f"test accuracy {exp.confusion.accuracy:.4f} after {len(exp.curve)} runs")


def _write_som_outputs(o: Outputs, exp: pipeline.SomExperiment, kernel: Kernel, prefix: str = ""):
    formats.save_codebook(o.path(f"{prefix}codebook.txt"), exp.som, kernel)
    formats.write_qe_curve(o.path(f"{prefix}qe_curve.csv"), exp.curve)
    o.path(f"{prefix}umatrix.pgm").write_bytes(export_pgm(exp.umatrix))
    write_umatrix_csv(exp.umatrix, exp.clusters, o.path(f"{prefix}umatrix.csv"))
    o.text(f"{prefix}clusters.csv", _clusters_csv(exp.clusters))


def _clusters_csv(clusters) -> str:
    rows = ["cluster_id,size"] + [f"{k},{s}" for k, s in enumerate(clusters.sizes())]
    return "\n".join(rows) + "\n"


def cmd_train_som(args) -> None:
    on = _load(args.on, Label.UNKNOWN, "ON events")
    cfg = _som_cfg(args)
    topo = _topology(args)
    with Outputs(args.out_dir) as o:
        exp = pipeline.run_som_experiment(on, topo, cfg, args.quantile)
        _write_som_outputs(o, exp, cfg.kernel)
        o.manifest(args, {
            "config": {**asdict(cfg), "kernel": cfg.kernel.value,
                       "sigma0_resolved": cfg.resolved_sigma0(topo)},
            "sub_seeds": _sub_seeds(args.seed, ["som-init", "som-train"]),
            "initial_qe": exp.initial_qe,
            "final_qe": exp.final_qe,
            "n_clusters": exp.clusters.n_clusters,
        })
    print(f"qe {exp.initial_qe:.6f} -> {exp.final_qe:.6f}, {exp.clusters.n_clusters} clusters")


def cmd_hybrid(args) -> None:
    gamma = _load(args.gamma, Label.GAMMA, "gamma")
    hadron = _load(args.hadron, Label.HADRON, "hadron")
    on = _load(args.on, Label.UNKNOWN, "ON events")
    layout = MlpLayout(10, tuple(args.hidden), 1)
    mlp_cfg, som_cfg, topo = _mlp_cfg(args), _som_cfg(args), _topology(args)
    with Outputs(args.out_dir) as o:
        try:
            hyb = pipeline.run_hybrid_experiment(gamma, hadron, on, topo, som_cfg, mlp_cfg, layout,
                                                 args.calib_fraction, args.quantile, args.threshold)
        except pipeline.HybridError as err:
            raise CommandError(f"hybrid: {err}") from None
        direct = pipeline.run_mlp_experiment(gamma, hadron, mlp_cfg, layout, args.threshold)
        o.timing.update(som_seconds=hyb.som_seconds, hybrid_mlp_seconds=hyb.mlp_seconds,
                        direct_mlp_seconds=direct.seconds)
        report = pipeline.comparison_report(hyb, direct, args.error_threshold)
        formats.save_mlp(o.path("hybrid_model.txt"), hyb.net, hyb.normalizer)
        formats.save_mlp(o.path("direct_model.txt"), direct.net, direct.normalizer)
        formats.write_error_curve(o.path("hybrid_error_curve.csv"), hyb.curve)
        formats.write_error_curve(o.path("direct_error_curve.csv"), direct.curve)
        o.text("hybrid_confusion.csv", hyb.confusion.to_csv())
        o.text("direct_confusion.csv", direct.confusion.to_csv())
        _write_som_outputs(o, hyb.som, som_cfg.kernel)
        o.text("report.json", json.dumps(report, indent=2) + "\n")
        o.manifest(args, {"layout": list(layout.sizes)})
    h, d = report["hybrid"], report["direct"]
    print(f"hybrid: accuracy {h['test_accuracy']:.4f}, runs to threshold {h['runs_to_threshold']}, "
          f"{h['training_set_size']} training vectors")
    print(f"direct: accuracy {d['test_accuracy']:.4f}, runs to threshold {d['runs_to_threshold']}, "
          f"{d['training_set_size']} training vectors")


def cmd_classify(args) -> None:
    try:
        net, norm = formats.read_mlp(_existing(args.model, "model"))
    except formats.ModelFormatError as err:
        raise CommandError(f"{args.model}: {err}") from None
    events = load_dataset(_existing(args.events, "events"))
    if net.layout.input_size != 10:
        raise CommandError(
            f"model expects {net.layout.input_size} inputs, events provide 10 image parameters"
        )
    X = np.array([features(r) for r in events]) if len(events) else np.empty((0, 10))
    if norm is not None:
        X = apply_normalizer(norm, X)
    out = forward_batch(net, X)[0] if len(X) else []
    lines = "".join(
        f"{format(float(v), '.17g')} {'gamma' if v >= args.threshold else 'hadron'}\n" for v in out
    )
    if args.out_dir is None:
        sys.stdout.write(lines)
        return
    with Outputs(args.out_dir) as o:
        o.text("classified.txt", lines)
        o.manifest(args)


def cmd_umatrix(args) -> None:
    try:
        som_map, kernel = formats.read_codebook(_existing(args.codebook, "codebook"))
    except formats.ModelFormatError as err:
        raise CommandError(f"{args.codebook}: {err}") from None
    u = compute_umatrix(som_map)
    clusters = extract_clusters(u, args.quantile)
    with Outputs(args.out_dir) as o:
        o.path("umatrix.pgm").write_bytes(export_pgm(u))
        write_umatrix_csv(u, clusters, o.path("umatrix.csv"))
        o.text("clusters.csv", _clusters_csv(clusters))
        o.manifest(args, {"kernel": kernel.value, "n_clusters": clusters.n_clusters})


def cmd_replay(args) -> None:
    doc = json.loads(_existing(args.manifest, "manifest").read_text())
    stored = argparse.Namespace(**doc["args"])
    if args.out_dir is not None:
        stored.out_dir = args.out_dir
    handler = COMMANDS.get(stored.command)
    if handler is None or stored.command == "replay":
        raise CommandError(f"manifest names unknown command {stored.command!r}")
    handler(stored)


COMMANDS = {
    "synth": cmd_synth,
    "train-mlp": cmd_train_mlp,
    "train-som": cmd_train_som,
    "hybrid": cmd_hybrid,
    "classify": cmd_classify,
    "umatrix": cmd_umatrix,
    "replay": cmd_replay,
}


def _add_common(p, out_dir_default: str | None = "out", threshold: bool = False):
    p.add_argument("--seed", type=_nonneg_int, default=0, help="master seed (default 0)")
    p.add_argument("--out-dir", default=out_dir_default, help="output directory")
    if threshold:
        p.add_argument("--threshold", type=float, default=0.5,
                       help="output >= threshold is classified gamma (default 0.5)")


def _add_mlp_flags(p):
    p.add_argument("--method", choices=[m.value for m in Method], default="bfgs")
    p.add_argument("--runs", type=_nonneg_int, default=1000,
                   help="training runs: BFGS iterations or stochastic passes (default 1000)")
    p.add_argument("--hidden", type=_positive_int, nargs="+", default=[10],
                   help="hidden layer sizes (default 10)")
    p.add_argument("--eta0", type=float, default=0.1)
    p.add_argument("--eta-decay", type=float, default=1e-4)
    p.add_argument("--armijo-c", type=_fraction, default=1e-4)
    p.add_argument("--armijo-shrink", type=_fraction, default=0.5)


def _add_som_flags(p):
    p.add_argument("--width", type=_positive_int, default=25)
    p.add_argument("--height", type=_positive_int, default=25)
    p.add_argument("--topology", choices=[t.value for t in Topology], default="rectangular")
    p.add_argument("--kernel", choices=[k.value for k in Kernel], default="gaussian")
    p.add_argument("--epochs", type=_nonneg_int, default=300)
    p.add_argument("--alpha0", type=float, default=0.5)
    p.add_argument("--alpha-final", type=float, default=0.01)
    p.add_argument("--sigma0", type=float, default=None,
                   help="initial radius (default max(width, height) / 2)")
    p.add_argument("--sigma-final", type=float, default=som.SomTrainConfig.sigma_final)
    p.add_argument("--quantile", type=_fraction, default=0.5,
                   help="U-matrix quantile separating clusters from boundaries")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"ghnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic gamma/hadron/ON event files")
    _add_common(p)
    p.add_argument("--n-gamma", type=_positive_int, default=N_GAMMA)
    p.add_argument("--n-hadron", type=_positive_int, default=N_HADRON)
    p.add_argument("--n-on", type=_positive_int, default=N_ON)
    p.add_argument("--on-gamma-fraction", type=float, default=0.5)
    p.add_argument("--separation", type=float, default=None,
                   help="shift hadron means this many standard deviations from gamma on every feature")

    p = sub.add_parser("train-mlp", help="train and test the perceptron on half of each class")
    _add_common(p, threshold=True)
    p.add_argument("--gamma", required=True)
    p.add_argument("--hadron", required=True)
    p.add_argument("--bins", type=_positive_int, default=50)
    _add_mlp_flags(p)

    p = sub.add_parser("train-som", help="train a self-organizing map on ON events")
    _add_common(p)
    p.add_argument("--on", required=True)
    _add_som_flags(p)

    p = sub.add_parser("hybrid", help="SOM clustering, then an MLP trained on labeled clusters")
    _add_common(p, threshold=True)
    p.add_argument("--gamma", required=True)
    p.add_argument("--hadron", required=True)
    p.add_argument("--on", required=True)
    p.add_argument("--calib-fraction", type=_fraction, default=0.1)
    p.add_argument("--error-threshold", type=float, default=0.06,
                   help="test error level for the runs-to-threshold comparison")
    _add_mlp_flags(p)
    _add_som_flags(p)

    p = sub.add_parser("classify", help="classify events with a saved perceptron")
    _add_common(p, out_dir_default=None, threshold=True)
    p.add_argument("--model", required=True)
    p.add_argument("--events", required=True)

    p = sub.add_parser("umatrix", help="recompute U-matrix and clusters from a saved codebook")
    _add_common(p)
    p.add_argument("--codebook", required=True)
    p.add_argument("--quantile", type=_fraction, default=0.5)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default=None, help="override the stored output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (CommandError, OSError, ValueError) as err:
        print(f"ghnet {args.command}: error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
