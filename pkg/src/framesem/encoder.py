"""Per-token input channels and embedding lookup for (sentence, trigger) pairs."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .corpus import Sentence, Span, TaggingSample, Token

CHANNELS = ("word", "pos", "deprel", "morph", "capshape", "prefix", "suffix")
UNK = "<unk>"
AFFIX_LEN = 3
VOCAB_FORMAT_VERSION = 1

DEFAULT_DIMS = {"word": 64, "pos": 8, "deprel": 8, "morph": 8, "capshape": 4, "prefix": 8, "suffix": 8}


def capshape(form: str) -> str:
    if form.isdigit():
        return "digit"
    if len(form) > 1 and form.isupper():
        return "ALLCAP"
    if form[:1].isupper() and (len(form) == 1 or not any(c.isupper() for c in form[1:])):
        return "Init-cap"
    if form.islower():
        return "lower"
    if any(c.isupper() for c in form) and any(c.islower() for c in form):
        return "mixed"
    return "other"


def token_features(tok: Token) -> tuple[str, ...]:
    low = tok.form.lower()
    return (
        low,
        tok.upos,
        tok.deprel,
        "|".join(tok.morph) if tok.morph else "_",
        capshape(tok.form),
        low[:AFFIX_LEN],
        low[-AFFIX_LEN:],
    )


class Vocabulary:
    """String-to-id maps per input channel; id 0 is UNK everywhere."""

    def __init__(self, items: Mapping[str, Iterable[str]]):
        self.items = {}
        self.ids = {}
        for ch in CHANNELS:
            strings = [UNK] + [s for s in items[ch] if s != UNK]
            if len(set(strings)) != len(strings):
                raise ValueError(f"duplicate entries in channel {ch!r}")
            self.items[ch] = tuple(strings)
            self.ids[ch] = {s: i for i, s in enumerate(strings)}

    def size(self, channel: str) -> int:
        return len(self.items[channel])

    def sizes(self) -> dict[str, int]:
        return {ch: self.size(ch) for ch in CHANNELS}

    def lookup(self, channel: str, value: str) -> int:
        return self.ids[channel].get(value, 0)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.items == other.items

    def to_json(self) -> str:
        doc = {"version": VOCAB_FORMAT_VERSION, "channels": list(CHANNELS),
               "items": {ch: list(self.items[ch]) for ch in CHANNELS}}
        return json.dumps(doc, ensure_ascii=False, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        doc = json.loads(text)
        if doc.get("version") != VOCAB_FORMAT_VERSION:
            raise ValueError(f"unsupported vocabulary version {doc.get('version')!r}")
        if tuple(doc["channels"]) != CHANNELS:
            raise ValueError(f"channel order mismatch: {doc['channels']}")
        return cls({ch: doc["items"][ch][1:] for ch in CHANNELS})


def build_vocabularies(train_samples: Iterable[TaggingSample], min_count: int = 1) -> Vocabulary:
    """Collect channel vocabularies from the distinct training sentences.

    Only the word channel is thresholded by ``min_count``.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    seen = set()
    counts = {ch: Counter() for ch in CHANNELS}
    for sample in train_samples:
        key = (sample.doc_id, sample.sentence)
        if key in seen:
            continue
        seen.add(key)
        for tok in sample.sentence.tokens:
            for ch, value in zip(CHANNELS, token_features(tok)):
                counts[ch][value] += 1
    if not seen:
        raise ValueError("cannot build vocabularies from an empty training set")
    items = {}
    for ch in CHANNELS:
        keep = counts[ch] if ch != "word" else {w: c for w, c in counts[ch].items() if c >= min_count}
        items[ch] = sorted(keep)
    return Vocabulary(items)


@dataclass(frozen=True)
class EncodedSample:
    ids: np.ndarray    # (n, len(CHANNELS)) int64
    flags: np.ndarray  # (n,) 0/1 trigger marker

    def __len__(self):
        return len(self.flags)


def encode(sentence: Sentence, trigger: Span, vocab: Vocabulary) -> EncodedSample:
    n = len(sentence)
    a, b = trigger
    if not 1 <= a <= b <= n:
        raise ValueError(f"trigger span {trigger} outside a {n}-token sentence")
    ids = np.zeros((n, len(CHANNELS)), dtype=np.int64)
    for i, tok in enumerate(sentence.tokens):
        for j, (ch, value) in enumerate(zip(CHANNELS, token_features(tok))):
            ids[i, j] = vocab.lookup(ch, value)
    flags = np.zeros(n, dtype=np.int64)
    flags[a - 1:b] = 1
    return EncodedSample(ids, flags)


def embed(encoded: EncodedSample, tables: Mapping[str, np.ndarray]) -> np.ndarray:
    """Concatenate channel embeddings and the trigger flag: width sum(dims) + 1."""
    parts = []
    for j, ch in enumerate(CHANNELS):
        table = tables[ch]
        col = encoded.ids[:, j]
        if col.size and (col.min() < 0 or col.max() >= table.shape[0]):
            raise IndexError(f"id out of range for channel {ch!r} (table has {table.shape[0]} rows)")
        parts.append(table[col])
    parts.append(encoded.flags[:, None].astype(np.float64))
    return np.concatenate(parts, axis=1)
