"""Frame semantic parsing as BIO sequence tagging, with span-level evaluation
and a document complexity study."""

from importlib import resources

__version__ = "0.1.0"

from .corpus import (Document, FrameInstance, LabelSet, Sentence, TaggingSample, Token, generate_samples,
                     kfold_split, parse_corpus, read_corpus, serialize_corpus, split_corpus, validate_document,
                     write_corpus)
from .lexicon import FrameLexicon, compatible_fes, dump_lexicon, load_lexicon
from .encoder import Vocabulary, build_vocabularies, embed, encode
from .tagger import TaggerConfig, TaggerParams, TrainConfig, forward, grad_check, init_params, train
from .decoder import PredictedInstance, PredictedSpan, coherence_filter, decode, predict
from .evaluator import breakdown, evaluate, match_spans, pr_curve
from .complexity import analyze, fit_ols, incremental_selection, pearson, t_test
from .synth import SynthConfig, synth_corpus
from .bundle import Model, load_model, save_model


def toy_paths():
    """Paths of the shipped toy corpus and lexicon."""
    base = resources.files(__name__) / "data"
    return base / "toy_corpus.txt", base / "toy_lexicon.tsv"
