"""Span scoring (soft / weighted / hard), PR sweeps and factor breakdowns."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Document, FrameInstance, Sentence, Span
from .decoder import PredictedInstance, PredictedSpan, apply_threshold
from .lexicon import FrameLexicon, coarse_pos, frame_size_class

METRICS = ("soft", "weighted", "hard")
FACTORS = ("trigger_pos", "trigger_root", "sentence_length", "frame_size", "fe_label", "length_root")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class MatchedPair:
    hyp: tuple[str, Span]
    ref: tuple[str, Span]
    p_credit: float
    r_credit: float


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[MatchedPair, ...]
    unmatched_hyps: tuple[tuple[str, Span], ...]
    unmatched_refs: tuple[tuple[str, Span], ...]

    @property
    def hyp_count(self):
        return len(self.pairs) + len(self.unmatched_hyps)

    @property
    def ref_count(self):
        return len(self.pairs) + len(self.unmatched_refs)


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f_measure: float
    weighted_tp_precision: float
    weighted_tp_recall: float
    hyp_count: int
    ref_count: int
    precision_defined: bool = True
    recall_defined: bool = True


def _as_span(item) -> tuple[str, Span]:
    if isinstance(item, PredictedSpan):
        return item.label, tuple(item.span)
    label, span = item
    return label, tuple(span)


def _overlap(a: Span, b: Span) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]) + 1)


def _length(s: Span) -> int:
    return s[1] - s[0] + 1


def match_spans(hyps: Iterable, refs: Iterable, metric: str) -> MatchResult:
    """Greedy one-to-one matching of same-label spans.

    Candidates share the FE label and overlap by at least one token (hard:
    identical spans). Pairs are taken by decreasing overlap, ties broken by
    earlier reference start, then earlier hypothesis start.
    """
    if metric not in METRICS:
        raise EvaluationError(f"unknown metric {metric!r}")
    hyps = [_as_span(h) for h in hyps]
    refs = [_as_span(r) for r in refs]
    for i, (lh, sh) in enumerate(hyps):
        for lj, sj in hyps[i + 1:]:
            if lh == lj and _overlap(sh, sj):
                raise EvaluationError(f"overlapping hypotheses with label {lh!r}: {sh} and {sj}")
    cands = []
    for i, (lh, sh) in enumerate(hyps):
        for j, (lr, sr) in enumerate(refs):
            if lh != lr:
                continue
            ov = _overlap(sh, sr)
            if ov == 0 or (metric == "hard" and sh != sr):
                continue
            cands.append((-ov, sr[0], sh[0], j, i, ov))
    cands.sort()
    used_h, used_r = set(), set()
    pairs = []
    for _, _, _, j, i, ov in cands:
        if i in used_h or j in used_r:
            continue
        used_h.add(i)
        used_r.add(j)
        h, r = hyps[i], refs[j]
        if metric == "weighted":
            pairs.append(MatchedPair(h, r, ov / _length(h[1]), ov / _length(r[1])))
        else:
            pairs.append(MatchedPair(h, r, 1.0, 1.0))
    return MatchResult(
        tuple(pairs),
        tuple(h for i, h in enumerate(hyps) if i not in used_h),
        tuple(r for j, r in enumerate(refs) if j not in used_r),
    )


def f_measure(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def score(results: Iterable[MatchResult], metric: str = "soft") -> Score:
    if metric not in METRICS:
        raise EvaluationError(f"unknown metric {metric!r}")
    tp_p = tp_r = 0.0
    n_hyp = n_ref = 0
    for res in results:
        for pair in res.pairs:
            tp_p += pair.p_credit
            tp_r += pair.r_credit
        n_hyp += res.hyp_count
        n_ref += res.ref_count
    p = tp_p / n_hyp if n_hyp else 0.0
    r = tp_r / n_ref if n_ref else 0.0
    return Score(p, r, f_measure(p, r), tp_p, tp_r, n_hyp, n_ref, n_hyp > 0, n_ref > 0)


# -- evaluation units ----------------------------------------------------------


@dataclass(frozen=True)
class EvalUnit:
    """One (sentence, trigger) pair with its gold and predicted instance."""

    doc: str
    sentence: Sentence
    gold: FrameInstance
    pred: PredictedInstance

    @property
    def key(self):
        return self.doc, self.sentence.id, tuple(self.gold.trigger)

    def hyps(self, threshold: float = 0.0) -> list[PredictedSpan]:
        return apply_threshold(self.pred.elements, threshold)

    def refs(self) -> list[tuple[str, Span]]:
        return list(self.gold.elements)


def align_units(docs: Iterable[Document], predictions: Iterable[PredictedInstance]) -> list[EvalUnit]:
    preds = {}
    for p in predictions:
        key = (p.doc, p.sent, tuple(p.trigger))
        if key in preds:
            raise EvaluationError(f"duplicate prediction for {key}")
        preds[key] = p
    units = []
    missing = []
    for doc in docs:
        for sent, inst in doc.instances():
            key = (doc.id, sent.id, tuple(inst.trigger))
            if key not in preds:
                missing.append(key)
                continue
            units.append(EvalUnit(doc.id, sent, inst, preds.pop(key)))
    if missing or preds:
        raise EvaluationError(
            f"predictions and gold do not align: {len(missing)} gold instance(s) without prediction "
            f"(first {missing[:3]}), {len(preds)} prediction(s) without gold (first {list(preds)[:3]})")
    return units


def match_units(units: Iterable[EvalUnit], metric: str, threshold: float = 0.0) -> list[MatchResult]:
    return [match_spans(u.hyps(threshold), u.refs(), metric) for u in units]


def evaluate(units: Sequence[EvalUnit], metric: str = "soft", threshold: float = 0.0) -> Score:
    return score(match_units(units, metric, threshold), metric)


def pr_curve(units: Sequence[EvalUnit], metric: str, thresholds: Sequence[float]):
    """One ``(t, P, R, F)`` point per threshold (ascending)."""
    ts = list(thresholds)
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise EvaluationError("thresholds must be sorted ascending")
    out = []
    for t in ts:
        s = evaluate(units, metric, t)
        out.append((t, s.precision, s.recall, s.f_measure))
    return out


def frame_accuracy(predicted: Mapping, gold: Mapping) -> float:
    """Share of aligned keys whose predicted frame equals the gold frame.

    Both mappings go from an alignment key to a frame label (``None`` for
    no frame) or to an instance carrying ``.frame``.
    """
    if set(predicted) != set(gold):
        raise EvaluationError("predicted and gold instances are not aligned")
    if not gold:
        return 0.0

    def frame_of(x):
        return getattr(x, "frame", x)

    right = sum(1 for k in gold if frame_of(predicted[k]) is not None and frame_of(predicted[k]) == frame_of(gold[k]))
    return right / len(gold)


def unit_frame_accuracy(units: Sequence[EvalUnit]) -> float:
    return frame_accuracy({u.key: u.pred.frame for u in units}, {u.key: u.gold.frame for u in units})


# -- factor breakdowns ---------------------------------------------------------


def trigger_head(sentence: Sentence, trigger: Span) -> int:
    """Index of the trigger's highest token (smallest depth, first on ties)."""
    a, b = trigger
    return min(range(a, b + 1), key=lambda i: (sentence.depth(i), i))


def is_root_trigger(sentence: Sentence, trigger: Span) -> bool:
    return sentence.depth(trigger_head(sentence, trigger)) == 0


def is_verbal_trigger(sentence: Sentence, trigger: Span) -> bool:
    return coarse_pos(sentence[trigger_head(sentence, trigger)].upos) == "V"


@dataclass(frozen=True)
class BreakdownRow:
    group: str
    share: float
    score: Score


def _length_median(units):
    seen = {}
    for u in units:
        seen[(u.doc, u.sentence.id)] = len(u.sentence)
    return float(np.median(list(seen.values()))) if seen else 0.0


def _group_of(unit, factor, median, lex):
    if factor == "trigger_pos":
        return "verbal" if is_verbal_trigger(unit.sentence, unit.gold.trigger) else "nominal"
    if factor == "trigger_root":
        return "root" if is_root_trigger(unit.sentence, unit.gold.trigger) else "nonroot"
    if factor == "sentence_length":
        return "short" if len(unit.sentence) < median else "long"
    if factor == "frame_size":
        if lex is None:
            raise EvaluationError("frame_size breakdown needs a lexicon")
        return frame_size_class(lex, unit.gold.frame)
    if factor == "length_root":
        return "/".join((_group_of(unit, "sentence_length", median, lex), _group_of(unit, "trigger_root", median, lex)))
    raise EvaluationError(f"unknown factor {factor!r}")


_GROUP_ORDER = {
    "trigger_pos": ["verbal", "nominal"],
    "trigger_root": ["root", "nonroot"],
    "sentence_length": ["short", "long"],
    "frame_size": ["Small", "Medium", "Large"],
    "length_root": ["short/root", "short/nonroot", "long/root", "long/nonroot"],
}


def fe_label_scores(units: Sequence[EvalUnit], metric: str = "soft", threshold: float = 0.0) -> dict[str, Score]:
    labels = sorted({lab for u in units for lab, _ in u.refs()} | {h.label for u in units for h in u.hyps(threshold)})
    out = {}
    for lab in labels:
        res = [match_spans([h for h in u.hyps(threshold) if h.label == lab], [r for r in u.refs() if r[0] == lab], metric)
               for u in units]
        out[lab] = score(res, metric)
    return out


def breakdown(units: Sequence[EvalUnit], factor: str, metric: str = "soft", lex: FrameLexicon | None = None,
              threshold: float = 0.0) -> list[BreakdownRow]:
    """Per-group scores and unit shares for one complexity factor.

    ``fe_label`` groups spans rather than units; its share is the share of
    reference spans carrying the label.
    """
    if factor not in FACTORS:
        raise EvaluationError(f"unknown factor {factor!r}")
    if factor == "fe_label":
        per = fe_label_scores(units, metric, threshold)
        total = sum(s.ref_count for s in per.values())
        return [BreakdownRow(lab, s.ref_count / total if total else 0.0, s) for lab, s in per.items()]
    median = _length_median(units)
    groups: dict[str, list[EvalUnit]] = {}
    for u in units:
        groups.setdefault(_group_of(u, factor, median, lex), []).append(u)
    n = len(units)
    order = _GROUP_ORDER[factor]
    return [BreakdownRow(g, len(groups[g]) / n, evaluate(groups[g], metric, threshold)) for g in order if g in groups]


def train_fe_counts(docs: Iterable[Document]) -> Counter:
    c = Counter()
    for doc in docs:
        for _, inst in doc.instances():
            c.update(label for label, _ in inst.elements)
    return c


def fe_vs_traincount(per_fe: Mapping[str, Score], train_counts: Mapping[str, int]):
    """Rows ``(fe_label, train_count, F)`` for every FE present in the references."""
    return [(lab, int(train_counts.get(lab, 0)), s.f_measure) for lab, s in sorted(per_fe.items()) if s.ref_count > 0]


# -- report files --------------------------------------------------------------


def write_tsv(stream, header: Sequence[str], rows: Iterable[Sequence]):
    w = csv.writer(stream, delimiter="\t", lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])


def write_pr_csv(stream, curve):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["threshold", "precision", "recall", "f"])
    for row in curve:
        w.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.6f}"
    return x
