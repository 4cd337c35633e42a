"""
Corpus and lexicon walkthrough
==============================

Load the shipped toy data, look at one annotated sentence, and see how a
sentence with two frame instances turns into two tagging samples.
"""

import numpy as np

from framesem import (LabelSet, SynthConfig, generate_samples, load_lexicon, read_corpus, serialize_corpus,
                      synth_corpus, toy_paths, validate_document)
from framesem.lexicon import frame_size_class

corpus_path, lexicon_path = toy_paths()
docs = read_corpus(corpus_path)
lex = load_lexicon(lexicon_path.read_text(encoding="utf-8"))
print(len(docs), "documents,", sum(d.n_triggers for d in docs), "frame instances")

# every document should be clean against the lexicon
for d in docs:
    print(d.id, validate_document(d, lex) or "ok")

# frames grouped by how many FEs they declare
for frame in sorted(lex.frames):
    print(f"{frame:16s} {len(lex.frames[frame]):2d} FEs  {frame_size_class(lex, frame)}")

# one sentence can carry several triggers; each gives its own BIO sample
doc = max(docs, key=lambda d: max(len(v) for v in d.annotations.values()))
busiest = max(doc.annotations, key=lambda sid: len(doc.annotations[sid]))
for sample in generate_samples(doc):
    if sample.sentence.id == busiest:
        print(" ".join(f"{t.form}/{lab}" for t, lab in zip(sample.sentence.tokens, sample.gold_labels)))

labels = LabelSet.from_lexicon(lex)
print(len(labels), "labels; first few:", labels.labels[:5])

# synthetic corpora share the same format and survive a round trip
synth_docs, synth_lex = synth_corpus(SynthConfig(n_docs=3, sentences_per_doc=4), seed=1)
text = serialize_corpus(synth_docs)
print(text.splitlines()[0])
lengths = np.array([len(s) for d in synth_docs for s in d.sentences])
print("synthetic sentence lengths: mean %.1f, sd %.1f" % (lengths.mean(), lengths.std()))
