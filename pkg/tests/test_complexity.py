import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from framesem.complexity import (ComplexityError, DocumentRecord, analyze, document_features, document_fmeasure,
                                 feature_matrix, filter_documents, fit_ols, greedy_oracle, incremental_selection,
                                 kfold_mse, max_cv_features, naive_baseline_mse, pearson, performance_stats, r_squared, rank_features,
                                 t_critical, t_test, write_ranking, write_scatter, write_trace)
from framesem.corpus import parse_corpus
from framesem.decoder import PredictedInstance
from framesem.evaluator import align_units, evaluate
from framesem.synth import SynthConfig, synth_corpus


def _sent(sid, upos, heads, trigger=None):
    lines = [f"# sent_id = {sid}"]
    for i, (u, h) in enumerate(zip(upos, heads), start=1):
        frame = "B-F" if i == trigger else "_"
        lines.append(f"{i}\tw{i}\tw\t{u}\t_\t{h}\t{'root' if h == 0 else 'dep'}\t{frame}\t_\t{1 if trigger else '_'}")
    return "\n".join(lines) + "\n\n"


def test_features_lengths_and_pos_share():
    text = "# doc_id = d\n"
    text += _sent("a", ["NOUN"] * 4 + ["VERB"] * 6, [0] + [1] * 9, trigger=1)
    text += _sent("b", ["VERB"] * 20, [0] + [1] * 19, trigger=2)
    text += _sent("c", ["ADJ"] * 5, [0] + [1] * 4)  # no trigger: ignored
    f = document_features(parse_corpus(text)[0])
    assert f["mean_sentence_length"] == 15.0
    assert f["pos_NOUN"] == pytest.approx(4 / 30)
    assert "pos_ADJ" not in f
    assert f["pct_root_trigger"] == 0.5
    assert f["mean_trigger_depth"] == 0.5
    assert f["mean_trigger_position"] == 1.5
    assert sum(v for k, v in f.items() if k.startswith("pos_")) == pytest.approx(1.0, abs=1e-9)
    assert sum(v for k, v in f.items() if k.startswith("dep_")) == pytest.approx(1.0, abs=1e-9)


def test_all_root_document():
    docs, _ = synth_corpus(SynthConfig(n_docs=1, sentences_per_doc=5, root_fraction=1.0), 0)
    f = document_features(docs[0])
    assert f["pct_root_trigger"] == 1.0 and f["mean_trigger_depth"] == 0.0


def test_document_without_triggers():
    doc = parse_corpus("# doc_id = d\n" + _sent("a", ["NOUN"], [0]))[0]
    with pytest.raises(ComplexityError):
        document_features(doc)


def test_document_fmeasure(toy):
    docs, _ = toy
    empty = [PredictedInstance(i.trigger, None, (), d.id, s.id) for d in docs for s, i in d.instances()]
    units = align_units(docs, empty)
    assert document_fmeasure(units) == 0.0
    assert document_fmeasure(units) == evaluate(units, "soft").f_measure


def test_filter_boundary():
    recs = [DocumentRecord("a", 29, {}, 50.0), DocumentRecord("b", 30, {}, 60.0)]
    assert [r.doc_id for r in filter_documents(recs)] == ["b"]


def test_pearson_examples():
    x = np.array([1.0, 4.0, 2.0, 8.0])
    assert pearson(x, x) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)
    # sxy = 5, sxx = 2, syy = 114/9
    assert pearson([1, 2, 3], [2, 4, 7]) == pytest.approx(5 / math.sqrt(2 * 114 / 9), abs=1e-12)
    assert pearson([1, 2, 3], [2, 4, 7]) == pytest.approx(0.9934, abs=1e-4)
    with pytest.raises(ComplexityError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ComplexityError):
        pearson([1, 2], [1, 2])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3), st.floats(-10, 10))
def test_pearson_symmetry_and_scale(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=12), rng.normal(size=12)
    r = pearson(x, y)
    assert -1 <= r <= 1
    assert pearson(y, x) == pytest.approx(r, abs=1e-12)
    assert pearson(a * x + b, y) == pytest.approx(math.copysign(1, a) * r, abs=1e-9)


def test_t_test_examples():
    t, sig = t_test(0.0, 50)
    assert t == 0 and not sig
    t, sig = t_test(0.44, 327)
    assert t == pytest.approx(8.83, abs=5e-3) and sig
    t, sig = t_test(0.10, 10)
    assert t == pytest.approx(0.284, abs=5e-4) and not sig
    assert t_test(1.0, 10) == (math.inf, True)
    assert t_test(-1.0, 10) == (-math.inf, True)


def test_t_critical_table():
    assert t_critical(1) == pytest.approx(12.706, abs=1e-3)
    assert t_critical(10) == pytest.approx(2.228, abs=1e-3)
    assert t_critical(200) == pytest.approx(1.972, abs=1e-3)
    assert t_critical(5000) == 1.96


def test_t_table_matches_scipy():
    from scipy.stats import t as student_t
    for df in range(1, 201):
        assert t_critical(df) == pytest.approx(student_t.ppf(0.975, df), abs=1e-6)


def test_rank_features():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 4))
    X[:, 3] = X[:, 0]
    X = np.column_stack([X, np.ones(30)])
    y = 2 * X[:, 0] + 1e-6 * rng.normal(size=30)
    rows = rank_features(X, y, ["f1", "f2", "f3", "a_copy", "const"])
    assert [r.feature for r in rows[:2]] == ["a_copy", "f1"]
    assert rows[0].r == rows[1].r and rows[0].r > 0.999999
    assert "const" not in [r.feature for r in rows]


def test_fit_ols_exact():
    X = np.array([[0.0], [1.0], [2.0]])
    w, b = fit_ols(X, [1.0, 4.0, 7.0], ridge=0.0)
    assert w[0] == pytest.approx(3.0, abs=1e-9) and b == pytest.approx(1.0, abs=1e-9)
    # default damping shrinks the slope by Sxx / (Sxx + ridge), Sxx = 2
    w, b = fit_ols(X, [1.0, 4.0, 7.0])
    assert w[0] == pytest.approx(3.0 * 2 / (2 + 1e-8), abs=1e-12)
    assert b == pytest.approx(4.0 - w[0], abs=1e-12)
    w, b = fit_ols(np.zeros((4, 0)), [1.0, 2.0, 3.0, 6.0])
    assert w.shape == (0,) and b == 3.0


def test_fit_ols_residuals_orthogonal():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=40)
    w, b = fit_ols(X, y)
    resid = y - X @ w - b
    assert np.all(np.abs(X.T @ resid) < 1e-6)


def test_fit_ols_collinear_names_features():
    rng = np.random.default_rng(2)
    x = rng.normal(size=20)
    X = np.column_stack([x, rng.normal(size=20), 2 * x])
    with pytest.raises(ComplexityError, match="a.*c"):
        fit_ols(X, rng.normal(size=20), ridge=0.0, names=["a", "b", "c"])


def _fold_oracle(X, y, cols, k, seed):
    # independent recomputation: explicit folds, z-scoring and lstsq
    n = len(y)
    perm = np.random.default_rng(seed).permutation(n)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    errs, start = [], 0
    for s in sizes:
        test = sorted(perm[start:start + s])
        start += s
        train = [i for i in range(n) if i not in set(test)]
        A = X[np.ix_(train, cols)]
        mu, sd = A.mean(axis=0), A.std(axis=0)
        Z = np.column_stack([np.ones(len(train)), (A - mu) / sd])
        coef = np.linalg.lstsq(Z, y[train], rcond=None)[0]
        Zt = np.column_stack([np.ones(len(test)), (X[np.ix_(test, cols)] - mu) / sd])
        errs.append(np.mean((y[test] - Zt @ coef) ** 2))
    return float(np.mean(errs))


def test_kfold_mse_matches_oracle():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 4))
    y = X @ [1.0, 0.0, 2.0, -1.0] + rng.normal(size=40)
    for cols in ([], [0], [2, 0], [0, 1, 2, 3]):
        assert kfold_mse(X, y, cols, 5, 7) == pytest.approx(_fold_oracle(X, y, sorted(cols), 5, 7), abs=1e-9)
    assert kfold_mse(X, y, [2, 0], 5, 7) == kfold_mse(X, y, [0, 2], 5, 7)
    assert kfold_mse(X, np.full(40, 3.0), [0, 1], 5, 0) == pytest.approx(0.0, abs=1e-20)
    with pytest.raises(ComplexityError):
        kfold_mse(X[:9], y[:9], [0], 5, 0)


def test_kfold_drops_constant_fold_feature():
    rng = np.random.default_rng(4)
    X = np.column_stack([rng.normal(size=20), np.zeros(20)])
    X[0, 1] = 1.0  # constant in every fold that does not hold row 0
    y = rng.normal(size=20)
    assert math.isfinite(kfold_mse(X, y, [0, 1], 4, 0))


def test_selection_single_feature_stops():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 5))
    y = 3 * X[:, 2] + 1
    m = incremental_selection(X, y, 5, 0)
    assert m.columns == [2]
    assert m.mse_trace[-1] < 1e-12
    assert all(b <= a for a, b in zip(m.mse_trace, m.mse_trace[1:]))
    np.testing.assert_allclose(m.predict(X), y, atol=1e-6)


def test_selection_matches_greedy_oracle():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(40, 6))
    y = X @ (rng.normal(size=6) * (rng.random(6) > 0.4)) + rng.normal(size=40)
    m = incremental_selection(X, y, 5, 1)
    chosen, trace = greedy_oracle(X, y, 5, 1)
    assert m.columns == chosen and m.mse_trace == trace


def test_baseline_and_r2():
    y = np.array([1.0, 2.0, 4.0, 9.0])
    assert naive_baseline_mse(y, y) == pytest.approx(np.var(y), abs=1e-12)
    assert naive_baseline_mse(y, np.full(3, y.mean())) == 0.0
    assert r_squared(y, y) == 1.0
    assert r_squared(y, np.full(4, y.mean())) == 0.0
    with pytest.raises(ComplexityError):
        r_squared([1.0, 1.0], [1.0, 2.0])


def test_performance_stats():
    m, s = performance_stats([0.5, 0.7])
    assert m == pytest.approx(0.6) and s == pytest.approx(0.1414, abs=1e-4)
    assert performance_stats([3.0, 3.0, 3.0])[1] == 0.0


def _planted_records(n_docs=60, seed=0):
    docs, _ = synth_corpus(SynthConfig(n_docs=n_docs, sentences_per_doc=30, doc_jitter=0.15), seed)
    rng = np.random.default_rng(seed)
    recs = []
    for d in docs:
        f = document_features(d)
        y = 70 - 8 * f["mean_trigger_depth"] + 5 * f["pct_verbal_trigger"] + rng.normal(0, 2)
        recs.append(DocumentRecord(d.id, d.n_triggers, f, y))
    return recs


def test_analyze_and_writers():
    recs = _planted_records()
    res = analyze(recs, k=5, seed=0)
    assert res.ranking[0].feature == "mean_trigger_depth" and res.ranking[0].r < 0
    assert len(res.scatter) == res.n_kept
    assert all(b <= a for a, b in zip(res.model.mse_trace, res.model.mse_trace[1:]))
    buf = io.StringIO()
    write_ranking(buf, res.ranking)
    assert buf.getvalue().startswith("feature\tr\tt\tsignificant\n")
    buf = io.StringIO()
    write_trace(buf, res.model)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "step\tfeature\tcv_mse" and len(lines) == len(res.model.mse_trace) + 1
    buf = io.StringIO()
    write_scatter(buf, res.scatter)
    assert len(buf.getvalue().splitlines()) == res.n_kept + 1


def test_analyze_too_few_documents():
    recs = [DocumentRecord("a", 40, {"x": 1.0}, 50.0), DocumentRecord("b", 10, {"x": 2.0}, 60.0)]
    with pytest.raises(ComplexityError):
        analyze(recs)


def test_feature_matrix_fills_missing():
    recs = [DocumentRecord("a", 30, {"pos_X": 0.5}, 1.0), DocumentRecord("b", 30, {"pos_Y": 0.25}, 2.0)]
    names, X = feature_matrix(recs)
    assert X[0, names.index("pos_Y")] == 0.0 and X[1, names.index("pos_Y")] == 0.25


def test_selection_stops_when_folds_cannot_fit_more():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(8, 12))
    y = X @ rng.normal(size=12)
    assert max_cv_features(8, 4) == 5  # smallest training fold has 6 rows
    model = incremental_selection(X, y, k=4, seed=0)
    chosen, trace = greedy_oracle(X, y, k=4, seed=0)
    assert len(model.columns) <= 5
    assert model.columns == chosen and model.mse_trace == pytest.approx(trace)
