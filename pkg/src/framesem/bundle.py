"""Model bundle on disk.

A bundle is a directory holding::

    config.json   hyperparameters, seed, label set, channel order
    vocab.json    channel vocabularies
    lexicon.tsv   frame lexicon the label set was built from
    tensors.bin   all parameters, little-endian float64, concatenated
    tensors.idx   one line per tensor: name, byte offset, shape
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import LabelSet
from .encoder import CHANNELS, Vocabulary
from .lexicon import FrameLexicon, dump_lexicon, load_lexicon
from .tagger import TaggerConfig, TaggerParams, TrainConfig

BUNDLE_VERSION = 1
_LE_F64 = np.dtype("<f8")


class BundleError(ValueError):
    pass


@dataclass
class Model:
    params: TaggerParams
    vocab: Vocabulary
    labels: LabelSet
    lexicon: FrameLexicon
    train_config: TrainConfig
    seed: int
    extra: dict | None = None


def write_tensors(arrays: dict[str, np.ndarray], bin_path, idx_path):
    offset = 0
    lines = []
    with open(bin_path, "wb") as fh:
        for name in sorted(arrays):
            a = np.ascontiguousarray(arrays[name], dtype=_LE_F64)
            fh.write(a.tobytes())
            shape = "x".join(str(d) for d in a.shape)
            lines.append(f"{name}\t{offset}\t{shape}\n")
            offset += a.nbytes
    Path(idx_path).write_text("".join(lines), encoding="utf-8")


def read_tensors(bin_path, idx_path) -> dict[str, np.ndarray]:
    raw = Path(bin_path).read_bytes()
    out = {}
    for lineno, line in enumerate(Path(idx_path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            name, offset, shape = line.split("\t")
            offset = int(offset)
            dims = tuple(int(d) for d in shape.split("x")) if shape else ()
        except ValueError:
            raise BundleError(f"tensors.idx line {lineno}: malformed entry {line!r}") from None
        size = int(np.prod(dims, dtype=np.int64)) * _LE_F64.itemsize
        if offset < 0 or offset + size > len(raw):
            raise BundleError(f"tensor {name!r} runs past the end of tensors.bin")
        out[name] = np.frombuffer(raw, dtype=_LE_F64, count=size // 8, offset=offset).reshape(dims).astype(np.float64)
    return out


def save_model(model: Model, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    cfg = {
        "version": BUNDLE_VERSION,
        "seed": int(model.seed),
        "channels": list(CHANNELS),
        "labels": list(model.labels.labels),
        "tagger": model.params.config.to_dict(),
        "training": model.train_config.to_dict(),
        "extra": model.extra or {},
    }
    (path / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (path / "vocab.json").write_text(model.vocab.to_json(), encoding="utf-8")
    (path / "lexicon.tsv").write_text(dump_lexicon(model.lexicon), encoding="utf-8")
    write_tensors(model.params.arrays, path / "tensors.bin", path / "tensors.idx")


def load_model(path) -> Model:
    path = Path(path)
    for name in ("config.json", "vocab.json", "lexicon.tsv", "tensors.bin", "tensors.idx"):
        if not (path / name).is_file():
            raise BundleError(f"{path} is not a model bundle: missing {name}")
    cfg = json.loads((path / "config.json").read_text(encoding="utf-8"))
    if cfg.get("version") != BUNDLE_VERSION:
        raise BundleError(f"unsupported bundle version {cfg.get('version')!r}")
    if tuple(cfg["channels"]) != CHANNELS:
        raise BundleError(f"channel order mismatch: {cfg['channels']}")
    config = TaggerConfig.from_dict(cfg["tagger"])
    arrays = read_tensors(path / "tensors.bin", path / "tensors.idx")
    params = TaggerParams(config, arrays)
    vocab = Vocabulary.from_json((path / "vocab.json").read_text(encoding="utf-8"))
    if vocab.sizes() != config.vocab_sizes:
        raise BundleError("vocabulary sizes disagree with the tagger config")
    labels = LabelSet(cfg["labels"])
    if len(labels) != config.n_labels:
        raise BundleError("label set size disagrees with the tagger config")
    lex = load_lexicon((path / "lexicon.tsv").read_text(encoding="utf-8"))
    return Model(params, vocab, labels, lex, TrainConfig(**cfg["training"]), int(cfg["seed"]), cfg.get("extra") or {})
