"""
Training the highway BiLSTM tagger
==================================

Check the analytic gradients against finite differences, then overfit the
toy corpus and save the model bundle.
"""

import tempfile
from pathlib import Path

from framesem import (LabelSet, TaggerConfig, TrainConfig, build_vocabularies, encode, generate_samples,
                      grad_check, init_params, load_lexicon, load_model, read_corpus, save_model, toy_paths)
from framesem.pipeline import fit_model
from framesem.tagger import token_accuracy

corpus_path, lexicon_path = toy_paths()
docs = read_corpus(corpus_path)
lex = load_lexicon(lexicon_path.read_text(encoding="utf-8"))

samples = [s for d in docs for s in generate_samples(d)]
vocab = build_vocabularies(samples)
labels = LabelSet.from_lexicon(lex)

# a small network is enough for a gradient check
config = TaggerConfig(vocab.sizes(), len(labels), hidden=(8, 8, 8, 8))
params = init_params(config, seed=0)
s = samples[0]
err = grad_check(params, encode(s.sentence, s.trigger, vocab), labels.encode(s.gold_labels), n_coords=50)
print(f"max relative gradient error {err:.2e}")

# overfit the toy corpus
train_config = TrainConfig(epochs=60, lr=1e-2)
model, history = fit_model(docs, lex, train_config, seed=0, hidden=(16, 16, 16, 16))
print("final loss %.4f" % history[-1]["loss"])
data = [(encode(x.sentence, x.trigger, model.vocab), model.labels.encode(x.gold_labels)) for x in samples]
print("token accuracy %.3f" % token_accuracy(model.params, data))

# bundles round-trip exactly
out = Path(tempfile.mkdtemp()) / "toy_model"
save_model(model, out)
again = load_model(out)
same = all((again.params.arrays[k] == v).all() for k, v in model.params.arrays.items())
print(sorted(p.name for p in out.iterdir()), "identical:", same)
