"""Plain-text model files and CSV outputs.

MLP model file (key = value lines)::

    format = ghnet-mlp
    version = 1
    layout = 10,10,1
    W0 = <row-major weights of layer 0>
    b0 = <biases of layer 0>
    ...
    norm_min = <optional input normalizer>
    norm_max = ...

Codebook file: a header ``width height dim topology kernel`` followed by
one reference vector per line in unit order.

Floats are written with 17 significant digits so they read back exactly.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np

from .data import Normalizer
from .mlp import MlpLayout, MlpNetwork, TrainRecordMlp
from .som import Kernel, SomMap, SomTopology, SomTrainRecord, Topology

MLP_FORMAT = "ghnet-mlp"
MLP_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _fmt(values: Iterable[float]) -> str:
    return " ".join(format(float(v), ".17g") for v in values)


def dump_mlp(net: MlpNetwork, normalizer: Normalizer | None = None) -> str:
    lines = [
        f"format = {MLP_FORMAT}",
        f"version = {MLP_VERSION}",
        "layout = " + ",".join(str(s) for s in net.layout.sizes),
    ]
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"W{k} = {_fmt(w.ravel())}")
        lines.append(f"b{k} = {_fmt(b)}")
    if normalizer is not None:
        lines.append(f"norm_min = {_fmt(normalizer.mins)}")
        lines.append(f"norm_max = {_fmt(normalizer.maxs)}")
    return "\n".join(lines) + "\n"


def load_mlp(text: str) -> tuple[MlpNetwork, Normalizer | None]:
    entries = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ModelFormatError(f"line {number}: expected 'key = value'")
        entries[key.strip()] = value.strip()
    if entries.get("format") != MLP_FORMAT:
        raise ModelFormatError(f"not a {MLP_FORMAT} model file")
    if entries.get("version") != str(MLP_VERSION):
        raise ModelFormatError(f"unsupported model version {entries.get('version')!r}")
    try:
        sizes = [int(s) for s in entries["layout"].split(",")]
        layout = MlpLayout(sizes[0], tuple(sizes[1:-1]), sizes[-1])
        ws, bs = [], []
        for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = np.array(entries[f"W{k}"].split(), dtype=float)
            bias = np.array(entries[f"b{k}"].split(), dtype=float)
            ws.append(w.reshape(a, b))
            bs.append(bias)
        net = MlpNetwork(layout, tuple(ws), tuple(bs))
        normalizer = None
        if "norm_min" in entries:
            normalizer = Normalizer(np.array(entries["norm_min"].split(), dtype=float),
                                    np.array(entries["norm_max"].split(), dtype=float))
            if normalizer.dim != layout.input_size:
                raise ModelFormatError("normalizer dimension does not match layout")
    except ModelFormatError:
        raise
    except (KeyError, ValueError, IndexError) as err:
        raise ModelFormatError(f"corrupted model file: {err}") from None
    return net, normalizer


def save_mlp(path, net: MlpNetwork, normalizer: Normalizer | None = None) -> None:
    Path(path).write_text(dump_mlp(net, normalizer))


def read_mlp(path) -> tuple[MlpNetwork, Normalizer | None]:
    return load_mlp(Path(path).read_text())


def dump_codebook(som: SomMap, kernel: Kernel) -> str:
    t = som.topology
    lines = [f"{t.width} {t.height} {som.dim} {t.kind.value} {Kernel(kernel).value}"]
    lines.extend(_fmt(v) for v in som.codebook)
    return "\n".join(lines) + "\n"


def load_codebook(text: str) -> tuple[SomMap, Kernel]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ModelFormatError("empty codebook file")
    head = lines[0].split()
    try:
        width, height, dim = (int(x) for x in head[:3])
        topo = SomTopology(Topology(head[3]), width, height)
        kernel = Kernel(head[4])
        cb = np.array([ln.split() for ln in lines[1:]], dtype=float)
    except (ValueError, IndexError) as err:
        raise ModelFormatError(f"corrupted codebook file: {err}") from None
    if len(head) != 5 or cb.shape != (width * height, dim):
        raise ModelFormatError(
            f"codebook header promises {width * height}x{dim}, body has shape {cb.shape}"
        )
    return SomMap(topo, cb), kernel


def save_codebook(path, som: SomMap, kernel: Kernel) -> None:
    Path(path).write_text(dump_codebook(som, kernel))


def read_codebook(path) -> tuple[SomMap, Kernel]:
    return load_codebook(Path(path).read_text())


def write_error_curve(path, curve: list[TrainRecordMlp]) -> None:
    with Path(path).open("w") as fh:
        fh.write("run,train_error,test_error\n")
        for r in curve:
            fh.write(f"{r.run_index},{r.train_error!r},{r.test_error!r}\n")


def write_qe_curve(path, curve: list[SomTrainRecord]) -> None:
    with Path(path).open("w") as fh:
        fh.write("epoch,qe\n")
        for r in curve:
            fh.write(f"{r.epoch},{r.quantization_error!r}\n")
