"""Train-and-predict glue shared by the command line and the notebooks."""

from __future__ import annotations

from typing import Iterable, Sequence

from .bundle import Model
from .corpus import Document, LabelSet, generate_samples
from .decoder import PredictedInstance, predict
from .encoder import DEFAULT_DIMS, build_vocabularies, encode
from .evaluator import align_units, evaluate
from .lexicon import FrameLexicon
from .tagger import TaggerConfig, TrainConfig, train


def encode_documents(docs: Iterable[Document], model_or_vocab, labels: LabelSet):
    vocab = getattr(model_or_vocab, "vocab", model_or_vocab)
    data = []
    for doc in docs:
        for s in generate_samples(doc):
            data.append((encode(s.sentence, s.trigger, vocab), labels.encode(s.gold_labels)))
    return data


def predict_documents(model: Model, docs: Iterable[Document], threshold: float = 0.0) -> list[PredictedInstance]:
    """One prediction per gold (sentence, trigger) pair, in corpus order."""
    out = []
    for doc in docs:
        for sent, inst in doc.instances():
            out.append(predict(sent, inst.trigger, model.params, model.vocab, model.lexicon, model.labels,
                               threshold, doc.id))
    return out


def fit_model(train_docs: Sequence[Document], lex: FrameLexicon, train_config: TrainConfig, seed: int,
              hidden: Sequence[int] = (64, 64, 64, 64), directions: Sequence[str] = ("F", "B", "F", "B"),
              channel_dims=None, min_count: int = 1, dev_docs: Sequence[Document] | None = None):
    """Build vocabularies and labels from ``train_docs`` and train a tagger.

    With ``dev_docs`` training stops early on the dev soft F-measure.
    Returns ``(model, history)``.
    """
    samples = [s for d in train_docs for s in generate_samples(d)]
    vocab = build_vocabularies(samples, min_count)
    labels = LabelSet.from_lexicon(lex)
    config = TaggerConfig(vocab.sizes(), len(labels), dict(channel_dims or DEFAULT_DIMS), tuple(hidden),
                          tuple(directions))
    data = encode_documents(train_docs, vocab, labels)

    def dev_eval(params):
        m = Model(params, vocab, labels, lex, train_config, seed)
        return evaluate(align_units(dev_docs, predict_documents(m, dev_docs)), "soft").f_measure

    params, history = train(data, config, train_config, seed, dev_eval=dev_eval if dev_docs else None)
    return Model(params, vocab, labels, lex, train_config, seed), history


def label_set_diff(model: Model, docs: Iterable[Document]) -> list[str]:
    """Labels used by ``docs`` that the bundle cannot produce, as diff lines."""
    need = LabelSet.from_samples(s for d in docs for s in generate_samples(d))
    missing = sorted(set(need.labels) - set(model.labels.labels))
    return [f"+ {lab} (in corpus, not in model)" for lab in missing]
