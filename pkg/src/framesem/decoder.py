"""From token posteriors to a predicted frame instance.

Decoding one (sentence, trigger) pair: read the frame off the trigger
tokens, suppress FE labels the frame does not admit, take per-token argmax
labels, and group them into scored spans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .corpus import OUTSIDE, LabelSet, Sentence, Span, split_label
from .encoder import Vocabulary, encode
from .lexicon import FrameLexicon, compatible_fes
from .tagger import TaggerParams, predict_proba


@dataclass(frozen=True)
class PredictedSpan:
    label: str
    span: Span
    score: float


@dataclass(frozen=True)
class PredictedInstance:
    trigger: Span
    frame: str | None
    elements: tuple[PredictedSpan, ...] = ()
    doc: str = ""
    sent: str = ""

    def spans(self) -> list[tuple[str, Span]]:
        return [(e.label, e.span) for e in self.elements]


def _label_columns(labels: LabelSet):
    frames: dict[str, list[int]] = {}
    fes: dict[str, list[int]] = {}
    for i, lab in enumerate(labels.labels):
        _, kind, name = split_label(lab)
        if kind == "frame":
            frames.setdefault(name, []).append(i)
        elif kind == "fe":
            fes.setdefault(name, []).append(i)
    return frames, fes


def predict_frame(posteriors: np.ndarray, trigger: Span, labels: LabelSet) -> str | None:
    """Frame with the largest B+I mass over the trigger tokens.

    Ties go to the lexicographically smallest name; ``None`` when the
    ``O`` mass exceeds every frame's mass.
    """
    a, b = trigger
    rows = posteriors[a - 1:b]
    frames, _ = _label_columns(labels)
    if not frames:
        return None
    masses = {name: float(rows[:, cols].sum()) for name, cols in frames.items()}
    best = max(masses.values())
    winner = min(name for name, m in masses.items() if m == best)
    o_mass = float(rows[:, labels.index[OUTSIDE]].sum())
    if o_mass > best:
        return None
    return winner


def coherence_filter(posteriors: np.ndarray, frame: str | None, lex: FrameLexicon, labels: LabelSet) -> np.ndarray:
    """Zero FE labels the frame does not admit and renormalize each row.

    With no frame every FE label is dropped. A row left with no mass falls
    back to ``O``.
    """
    allowed = compatible_fes(lex, frame) if frame is not None else frozenset()
    _, fes = _label_columns(labels)
    out = np.array(posteriors, dtype=np.float64, copy=True)
    drop = [c for name, cols in fes.items() if name not in allowed for c in cols]
    if not drop:
        return out
    out[:, drop] = 0.0
    totals = out.sum(axis=1, keepdims=True)
    empty = totals[:, 0] <= 0.0
    if empty.any():
        out[empty, labels.index[OUTSIDE]] = 1.0
        totals[empty] = 1.0
    return out / totals


def extract_spans(posteriors: np.ndarray, labels: LabelSet) -> list[PredictedSpan]:
    best = posteriors.argmax(axis=1)
    spans = []
    current = None  # [name, start, probs]
    for t, lab_id in enumerate(best, start=1):
        prefix, kind, name = split_label(labels[lab_id])
        p = float(posteriors[t - 1, lab_id])
        if kind != "fe":
            if current:
                spans.append(current)
            current = None
            continue
        # an I- label without a same-FE predecessor opens a new span
        if prefix == "I" and current is not None and current[0] == name:
            current[2].append(p)
            continue
        if current:
            spans.append(current)
        current = [name, t, [p]]
    if current:
        spans.append(current)
    return [PredictedSpan(name, (start, start + len(ps) - 1), float(np.mean(ps))) for name, start, ps in spans]


def apply_threshold(spans: Iterable[PredictedSpan], t: float) -> list[PredictedSpan]:
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    return [s for s in spans if s.score >= t]


def decode(posteriors: np.ndarray, trigger: Span, lex: FrameLexicon, labels: LabelSet, threshold: float = 0.0,
           doc: str = "", sent: str = "") -> PredictedInstance:
    frame = predict_frame(posteriors, trigger, labels)
    if frame is not None and frame not in lex.frames:
        frame = None
    filtered = coherence_filter(posteriors, frame, lex, labels)
    spans = apply_threshold(extract_spans(filtered, labels), threshold)
    return PredictedInstance(tuple(trigger), frame, tuple(spans), doc, sent)


def predict(sentence: Sentence, trigger: Span, params: TaggerParams, vocab: Vocabulary, lex: FrameLexicon,
            labels: LabelSet, threshold: float = 0.0, doc: str = "") -> PredictedInstance:
    probs = predict_proba(params, encode(sentence, trigger, vocab))
    return decode(probs, trigger, lex, labels, threshold, doc, sentence.id)


# -- prediction files ----------------------------------------------------------


def instance_record(inst: PredictedInstance) -> dict:
    return {
        "doc": inst.doc,
        "sent": inst.sent,
        "trigger": list(inst.trigger),
        "frame": inst.frame,
        "elements": [{"label": e.label, "span": list(e.span), "score": e.score} for e in inst.elements],
    }


def record_instance(rec: dict) -> PredictedInstance:
    elements = tuple(PredictedSpan(e["label"], tuple(e["span"]), float(e["score"])) for e in rec["elements"])
    return PredictedInstance(tuple(rec["trigger"]), rec["frame"], elements, rec["doc"], rec["sent"])


def write_predictions(instances: Iterable[PredictedInstance], stream: TextIO):
    for inst in instances:
        stream.write(json.dumps(instance_record(inst), ensure_ascii=False) + "\n")


def read_predictions(stream: TextIO) -> list[PredictedInstance]:
    return [record_instance(json.loads(line)) for line in stream if line.strip()]
