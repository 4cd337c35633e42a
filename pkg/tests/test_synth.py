import numpy as np
import pytest

from framesem.corpus import serialize_corpus, validate_document
from framesem.evaluator import is_root_trigger, is_verbal_trigger
from framesem.lexicon import dump_lexicon
from framesem.synth import SynthConfig, SynthConfigError, synth_corpus


def _fractions(docs):
    roots = verbal = n = 0
    for d in docs:
        for s, inst in d.instances():
            roots += is_root_trigger(s, inst.trigger)
            verbal += is_verbal_trigger(s, inst.trigger)
            n += 1
    return roots / n, verbal / n


def test_requested_counts():
    docs, lex = synth_corpus(SynthConfig(n_docs=20, sentences_per_doc=5), seed=0)
    assert len(docs) == 20
    assert serialize_corpus(docs).count("# doc_id") == 20
    assert all(validate_document(d, lex) == [] for d in docs)


def test_all_root():
    docs, _ = synth_corpus(SynthConfig(n_docs=3, sentences_per_doc=5, root_fraction=1.0), seed=1)
    for d in docs:
        for s, inst in d.instances():
            a, b = inst.trigger
            assert any(s[i].head == 0 for i in range(a, b + 1))


def test_factor_fractions_within_five_points():
    cfg = SynthConfig(n_docs=30, sentences_per_doc=10, root_fraction=0.4, verbal_fraction=0.7)
    root, verbal = _fractions(synth_corpus(cfg, seed=4)[0])
    assert abs(root - 0.4) <= 0.05
    assert abs(verbal - 0.7) <= 0.05


def test_mean_length():
    docs, _ = synth_corpus(SynthConfig(n_docs=20, sentences_per_doc=10, mean_length=10.0), seed=3)
    lengths = [len(s) for d in docs for s in d.sentences]
    assert 9.0 <= np.mean(lengths) <= 11.0


def test_byte_identical():
    cfg = SynthConfig(n_docs=5, sentences_per_doc=4, second_instance_rate=0.5)
    a, la = synth_corpus(cfg, seed=9)
    b, lb = synth_corpus(cfg, seed=9)
    assert serialize_corpus(a) == serialize_corpus(b)
    assert dump_lexicon(la) == dump_lexicon(lb)
    c, _ = synth_corpus(cfg, seed=10)
    assert serialize_corpus(a) != serialize_corpus(c)


def test_infeasible():
    with pytest.raises(SynthConfigError):
        synth_corpus(SynthConfig(mean_length=3.0, max_depth=3), seed=0)
    with pytest.raises(SynthConfigError):
        synth_corpus(SynthConfig(root_fraction=1.5), seed=0)
