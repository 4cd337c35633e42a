"""Acceptance criteria 1-10, one test each.

Every test prints a single PASS/FAIL line (also repeated in the pytest
terminal summary) before asserting.
"""

import math
import statistics
import time

import numpy as np
from framesem import toy_paths
from framesem.cli import main
from framesem.complexity import (DocumentRecord, analyze, document_features, fit_ols, greedy_oracle,
                                 incremental_selection, naive_baseline_mse, pearson, r_squared, t_test)
from framesem.corpus import LabelSet, generate_samples, parse_corpus, read_corpus, serialize_corpus
from framesem.decoder import PredictedInstance, PredictedSpan, coherence_filter, decode, predict_frame
from framesem.encoder import build_vocabularies
from framesem.evaluator import align_units, match_spans, pr_curve, score
from framesem.lexicon import build_lexicon, compatible_fes
from framesem.pipeline import encode_documents, fit_model, predict_documents
from framesem.bundle import Model
from framesem.synth import SynthConfig, synth_corpus
from framesem.tagger import TaggerConfig, TrainConfig, grad_check, init_params, token_accuracy, train

from conftest import record

METRICS = ("soft", "weighted", "hard")


def test_01_gradient_fidelity():
    start = time.perf_counter()
    docs, lex = synth_corpus(SynthConfig(n_docs=2, sentences_per_doc=5), seed=1)
    samples = [s for d in docs for s in generate_samples(d)]
    vocab = build_vocabularies(samples)
    labels = LabelSet.from_lexicon(lex)
    config = TaggerConfig(vocab.sizes(), len(labels))  # default dims, 4 x 64 highway LSTM
    params = init_params(config, seed=3)
    data = encode_documents(docs, vocab, labels)
    rng = np.random.default_rng(0)
    worst = 0.0
    for k, i in enumerate(rng.choice(len(data), size=5, replace=False)):
        enc, gold = data[i]
        worst = max(worst, grad_check(params, enc, gold, epsilon=1e-5, n_coords=200, seed=k))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 120
    record(1, "gradient fidelity", ok, f"max rel err {worst:.2e} over 5x200 coords (<1e-4), {elapsed:.1f}s (<120s)")
    assert ok


def test_02_learnability():
    start = time.perf_counter()
    cfg = SynthConfig(n_docs=5, sentences_per_doc=10, vocab_size=200, n_frames=3, fes_per_frame=4)
    docs, lex = synth_corpus(cfg, seed=0)
    n_sent = sum(len(d.sentences) for d in docs)
    samples = [s for d in docs for s in generate_samples(d)]
    vocab = build_vocabularies(samples)
    labels = LabelSet.from_lexicon(lex)
    data = encode_documents(docs, vocab, labels)
    config = TaggerConfig(vocab.sizes(), len(labels))
    params, history = train(data, config, TrainConfig(epochs=200), seed=0)
    acc = token_accuracy(params, data)
    model = Model(params, vocab, labels, lex, TrainConfig(epochs=200), 0)
    units = align_units(docs, predict_documents(model, docs))
    # exact: right frame and every FE span hard-matched with nothing extra
    exact = sum(u.pred.frame == u.gold.frame and sorted(u.pred.spans()) == sorted(u.gold.elements)
                for u in units) / len(units)
    elapsed = time.perf_counter() - start
    ok = n_sent == 50 and acc >= 0.99 and exact >= 0.95 and elapsed < 300
    record(2, "learnability", ok, f"{n_sent} sentences, token acc {acc:.4f} (>=0.99), exact instances {exact:.3f} "
           f"(>=0.95), {len(history)} epochs, {elapsed:.1f}s (<300s)")
    assert ok


def _random_lexicon(rng):
    pool = [f"fe{i}" for i in range(12)]
    entries = []
    for f in range(int(rng.integers(1, 5))):
        fes = rng.choice(pool, size=int(rng.integers(1, 6)), replace=False)
        entries.append((f"Frame{f}", [str(x) for x in fes], [(f"lu{f}", "V")]))
    return build_lexicon(entries), pool


def test_03_coherence_soundness():
    rng = np.random.default_rng(2024)
    bad_spans = 0
    worst_row = 0.0
    for _ in range(10_000):
        lex, pool = _random_lexicon(rng)
        # label set may contain FEs the lexicon never admits
        labels = LabelSet.from_names(lex.frames, pool)
        n = int(rng.integers(1, 12))
        post = rng.dirichlet(np.full(len(labels), float(rng.uniform(0.05, 2.0))), size=n)
        a = int(rng.integers(1, n + 1))
        b = int(rng.integers(a, min(n, a + 2) + 1))
        frame = predict_frame(post, (a, b), labels)
        filtered = coherence_filter(post, frame, lex, labels)
        worst_row = max(worst_row, float(np.max(np.abs(filtered.sum(axis=1) - 1.0))))
        inst = decode(post, (a, b), lex, labels)
        allowed = compatible_fes(lex, inst.frame) if inst.frame else frozenset()
        bad_spans += sum(e.label not in allowed for e in inst.elements)
    ok = bad_spans == 0 and worst_row <= 1e-6
    record(3, "coherence filter soundness", ok, f"{bad_spans} incompatible spans in 10000 trials, "
           f"max |row sum - 1| {worst_row:.1e} (<=1e-6)")
    assert ok


def _random_unit(rng):
    """Random gold spans (disjoint, as the corpus guarantees) and hypotheses (disjoint per label)."""
    n = 20
    labels = ["A", "B", "C"]
    refs, used = [], np.zeros(n + 2, bool)
    for _ in range(int(rng.integers(0, 5))):
        a = int(rng.integers(1, n + 1))
        b = min(n, a + int(rng.integers(0, 4)))
        if not used[a:b + 1].any():
            used[a:b + 1] = True
            refs.append((str(rng.choice(labels)), (a, b)))
    hyps = []
    for _ in range(int(rng.integers(0, 6))):
        lab = str(rng.choice(labels))
        a = int(rng.integers(1, n + 1))
        b = min(n, a + int(rng.integers(0, 4)))
        if all(l2 != lab or b < s[0] or s[1] < a for l2, s in hyps):
            hyps.append((lab, (a, b)))
    if refs and rng.random() < 0.5:  # bias towards overlaps
        lab, (a, b) = refs[int(rng.integers(len(refs)))]
        shift = int(rng.integers(-2, 3))
        cand = (lab, (max(1, a + shift), max(1, a + shift) + (b - a)))
        if all(l2 != lab or cand[1][1] < s[0] or s[1] < cand[1][0] for l2, s in hyps):
            hyps.append(cand)
    return hyps, refs


def test_04_metric_ordering():
    rng = np.random.default_rng(7)
    violations = 0
    for _ in range(1000):
        units = [_random_unit(rng) for _ in range(int(rng.integers(1, 4)))]
        f = {m: score([match_spans(h, r, m) for h, r in units], m).f_measure for m in METRICS}
        violations += not (f["hard"] <= f["weighted"] <= f["soft"])
    fixtures = [
        # (hyp, ref, precision credit, recall credit)
        (("T", (3, 5)), ("T", (5, 8)), 1 / 3, 1 / 4),
        (("T", (1, 4)), ("T", (2, 3)), 2 / 4, 2 / 2),
        (("T", (2, 2)), ("T", (1, 5)), 1 / 1, 1 / 5),
        (("T", (1, 6)), ("T", (4, 9)), 3 / 6, 3 / 6),
        (("T", (1, 7)), ("T", (1, 7)), 1.0, 1.0),
    ]
    worst = 0.0
    for h, r, pc, rc in fixtures:
        pair = match_spans([h], [r], "weighted").pairs[0]
        worst = max(worst, abs(pair.p_credit - pc), abs(pair.r_credit - rc))
    ok = violations == 0 and worst <= 1e-12
    record(4, "metric ordering", ok, f"{violations} ordering violations in 1000 sets, "
           f"max weighted-credit error {worst:.1e} (<=1e-12)")
    assert ok


def _model_prediction_units():
    docs, lex = synth_corpus(SynthConfig(n_docs=6, sentences_per_doc=6), seed=5)
    model, _ = fit_model(docs[:4], lex, TrainConfig(epochs=4), seed=0, hidden=(16,) * 4)
    return align_units(docs[4:], predict_documents(model, docs[4:]))


def test_05_pr_monotonicity():
    rng = np.random.default_rng(11)
    sets = [_model_prediction_units()]
    for _ in range(50):
        docs, _ = synth_corpus(SynthConfig(n_docs=1, sentences_per_doc=4), seed=int(rng.integers(1 << 30)))
        preds = []
        for d in docs:
            for s, inst in d.instances():
                els = []
                for lab, (a, b) in inst.elements:
                    if rng.random() < 0.8:
                        a2 = max(1, a + int(rng.integers(-1, 2)))
                        els.append(PredictedSpan(lab, (a2, max(a2, b + int(rng.integers(-1, 2)))), float(rng.random())))
                preds.append(PredictedInstance(inst.trigger, inst.frame, tuple(els), d.id, s.id))
        sets.append(align_units(docs, preds))
    thresholds = np.round(np.linspace(0, 1, 41), 10)
    bad_mono = bad_zero = 0
    for units in sets:
        for m in METRICS:
            curve = pr_curve(units, m, thresholds)
            rec = [p[2] for p in curve]
            bad_mono += any(b > a for a, b in zip(rec, rec[1:]))
            raw = score([match_spans(u.pred.elements, u.refs(), m) for u in units], m)
            bad_zero += curve[0][1:] != (raw.precision, raw.recall, raw.f_measure)
    ok = bad_mono == 0 and bad_zero == 0
    record(5, "PR monotonicity", ok, f"{len(sets)} prediction sets x 3 metrics: {bad_mono} non-monotone recall "
           f"curves, {bad_zero} t=0 mismatches")
    assert ok


def _pearson_oracle(x, y):
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def _ols_oracle(X, y, ridge):
    # damped least squares as an augmented ordinary least-squares problem
    n, p = X.shape
    Z = np.hstack([np.ones((n, 1)), X])
    aug = np.vstack([Z, np.hstack([np.zeros((p, 1)), math.sqrt(ridge) * np.eye(p)])])
    coef = np.linalg.lstsq(aug, np.concatenate([y, np.zeros(p)]), rcond=None)[0]
    return coef[1:], coef[0]


def _r2_oracle(y, yhat):
    my = math.fsum(y) / len(y)
    return 1 - math.fsum((a - b) ** 2 for a, b in zip(y, yhat)) / math.fsum((a - my) ** 2 for a in y)


def test_06_statistics_oracles():
    rng = np.random.default_rng(99)
    worst = {"pearson": 0.0, "t": 0.0, "ols": 0.0, "r2": 0.0, "baseline": 0.0}
    for _ in range(100):
        p = int(rng.integers(1, 6))
        X = rng.normal(size=(40, p)) * rng.uniform(0.5, 3, size=p)
        y = X @ rng.normal(size=p) + rng.normal(scale=rng.uniform(0.1, 3), size=40)
        r = pearson(X[:, 0], y)
        worst["pearson"] = max(worst["pearson"], abs(r - _pearson_oracle(X[:, 0].tolist(), y.tolist())))
        t, _ = t_test(r, 40)
        worst["t"] = max(worst["t"], abs(t - r * math.sqrt(38 / (1 - r * r))) / max(1.0, abs(t)))
        w, b = fit_ols(X, y)
        wo, bo = _ols_oracle(X, y, 1e-8)
        worst["ols"] = max(worst["ols"], float(np.max(np.abs(w - wo))), abs(b - bo))
        yhat = X @ w + b
        worst["r2"] = max(worst["r2"], abs(r_squared(y, yhat) - _r2_oracle(y.tolist(), yhat.tolist())))
        worst["baseline"] = max(worst["baseline"], abs(naive_baseline_mse(y, y) - statistics.pvariance(y.tolist())))
    ok = all(v <= 1e-9 for k, v in worst.items() if k != "baseline") and worst["baseline"] <= 1e-12
    record(6, "statistics oracles", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
           + " (<=1e-9; baseline <=1e-12)")
    assert ok


def test_07_selection_oracle():
    rng = np.random.default_rng(3)
    names = [f"f{i}" for i in range(1, 7)]
    mismatches = 0
    for trial in range(20):
        X = rng.normal(size=(40, 6))
        beta = rng.normal(size=6) * (rng.random(6) < 0.6)
        y = X @ beta + rng.normal(scale=rng.uniform(0.2, 2), size=40)
        model = incremental_selection(X, y, 5, trial, names)
        chosen, trace = greedy_oracle(X, y, 5, trial)
        mismatches += model.columns != chosen or model.mse_trace != trace
    f3_first = 0
    for trial in range(20):
        X = rng.normal(size=(40, 6))
        y = 5 * X[:, 2] + rng.normal(scale=0.01, size=40)
        model = incremental_selection(X, y, 5, trial, names)
        f3_first += bool(model.features) and model.features[0] == "f3"
    ok = mismatches == 0 and f3_first >= 19
    record(7, "selection oracle", ok, f"{mismatches}/20 mismatches vs greedy oracle, f3 first in {f3_first}/20 (>=19)")
    assert ok


def test_08_planted_factor_recovery():
    start = time.perf_counter()
    cfg = SynthConfig(n_docs=200, sentences_per_doc=30, doc_jitter=0.15, mean_length=14.0, length_sd=4.0)
    docs, _ = synth_corpus(cfg, seed=11)
    rng = np.random.default_rng(5)
    records = []
    for d in docs:
        f = document_features(d)
        # F in percentage points; pct_verbal_trigger is a share in [0, 1]
        y = 70 - 8 * f["mean_trigger_depth"] + 5 * f["pct_verbal_trigger"] + rng.normal(0, 2)
        records.append(DocumentRecord(d.id, d.n_triggers, f, y))
    res = analyze(records, k=5, seed=0)
    top = res.ranking[0]
    two = res.model.mse_trace[min(2, len(res.model.mse_trace) - 1)]
    reduction = 1 - two / res.baseline_mse
    elapsed = time.perf_counter() - start
    ok = (res.n_kept == 200 and top.feature == "mean_trigger_depth" and top.r < 0 and reduction >= 0.40
          and elapsed < 600)
    record(8, "planted-factor recovery", ok, f"top |r| {top.feature} r={top.r:+.3f}, first two selected "
           f"{res.model.features[:2]}, 2-feature MSE reduction {reduction:.1%} (>=40%), {elapsed:.1f}s (<600s)")
    assert ok


def _files(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_09_determinism(tmp_path):
    outs = []
    for run in ("a", "b"):
        base = tmp_path / run
        assert main(["synth", "--seed", "13", "--n-docs", "4", "--sentences-per-doc", "5",
                     "--out", str(base / "synth")]) == 0
        # same inputs for both runs so manifests can match byte for byte
        corpus, lexicon = tmp_path / "a" / "synth" / "corpus.txt", tmp_path / "a" / "synth" / "lexicon.tsv"
        assert main(["train", "--seed", "13", "--corpus", str(corpus), "--lexicon", str(lexicon), "--epochs", "3",
                     "--hidden", "16", "--out", str(base / "model")]) == 0
        outs.append(_files(base))
    same = outs[0] == outs[1]
    ok = same and len(outs[0]) >= 10
    record(9, "determinism", ok, f"{len(outs[0])} artifact files (synth + train), byte-identical: {same}")
    assert ok


def test_10_round_trip():
    corpus, _ = toy_paths()
    toy = read_corpus(corpus)
    failures = int(parse_corpus(serialize_corpus(toy)) != toy)
    rng = np.random.default_rng(10)
    for i in range(100):
        cfg = SynthConfig(n_docs=int(rng.integers(1, 4)), sentences_per_doc=int(rng.integers(1, 6)),
                          second_instance_rate=float(rng.choice([0.0, 0.4])), n_frames=int(rng.integers(1, 5)))
        docs, _ = synth_corpus(cfg, seed=i)
        once = parse_corpus(serialize_corpus(docs))
        twice = parse_corpus(serialize_corpus(once))
        failures += not (once == docs and twice == once)
    ok = failures == 0
    record(10, "round-trip", ok, f"{failures} failures over toy corpus + 100 synthetic corpora")
    assert ok
