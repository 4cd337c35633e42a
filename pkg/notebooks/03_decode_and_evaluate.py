"""
Decoding and span evaluation
============================

Train a quick model on a synthetic corpus, decode held-out documents and
score them with soft, weighted and hard span matching.
"""

from framesem import SynthConfig, TrainConfig, synth_corpus, split_corpus
from framesem.evaluator import (FACTORS, align_units, breakdown, evaluate, match_spans, pr_curve,
                                unit_frame_accuracy)
from framesem.pipeline import fit_model, predict_documents

# the three metrics on a hand-made case: one exact hit, one partial, one miss
hyps = [("Agent", (0, 1)), ("Theme", (3, 3))]
refs = [("Agent", (0, 1)), ("Theme", (3, 5)), ("Time", (7, 8))]
for metric in ("soft", "weighted", "hard"):
    res = match_spans(hyps, refs, metric)
    print(metric, [(p.p_credit, round(p.r_credit, 3)) for p in res.pairs], len(res.unmatched_refs), "missed")

docs, lex = synth_corpus(SynthConfig(n_docs=12, sentences_per_doc=8), seed=3)
train_docs, test_docs = split_corpus(docs, 0.75, seed=3)
model, _ = fit_model(train_docs, lex, TrainConfig(epochs=15, lr=5e-3), seed=3, hidden=(16, 16, 16, 16))
units = align_units(test_docs, predict_documents(model, test_docs))

for metric in ("soft", "weighted", "hard"):
    s = evaluate(units, metric)
    print(f"{metric:8s} P {s.precision:.3f} R {s.recall:.3f} F {s.f_measure:.3f}")
print("frame accuracy %.3f" % unit_frame_accuracy(units))

# raising the posterior threshold trades recall for precision
for t, p, r, f in pr_curve(units, "soft", [0.0, 0.25, 0.5, 0.75, 0.9]):
    print(f"t={t:.2f}  P {p:.3f} R {r:.3f} F {f:.3f}")

for factor in FACTORS:
    if factor == "fe_label":
        continue
    rows = breakdown(units, factor, "soft", lex)
    print(factor, ", ".join(f"{r.group} {r.share:.0%} F={r.score.f_measure:.3f}" for r in rows))
