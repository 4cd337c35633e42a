"""Deterministic synthetic frame-annotated corpora with controllable factors.

Sentences are built around one trigger: a verbal or nominal lexical unit,
either at the root or embedded under a chain of support verbs. Each frame
element has a fixed syntactic realization (subject, object, or an oblique
introduced by its own preposition), so a tagger can learn the mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .corpus import CorpusError, Document, FrameInstance, Sentence, Token
from .lexicon import FrameLexicon, build_lexicon

FRAME_POOL = (
    "Attack", "Statement", "Arriving", "Creating", "Death", "Giving", "Motion",
    "Seeking", "Leadership", "Hiding-objects", "Deciding", "Sending", "Using",
    "Education-teaching", "Hostile-encounter", "Losing",
)
FE_POOL = (
    "Agent", "Theme", "Time", "Place", "Manner", "Purpose", "Goal", "Source",
    "Recipient", "Instrument", "Explanation", "Circumstances", "Means",
    "Duration", "Beneficiary", "Degree",
)
PREPOSITIONS = (
    "à", "de", "pour", "avec", "sur", "dans", "par", "vers", "sans", "sous",
    "contre", "chez", "selon", "parmi",
)
SUPPORT_VERBS = ("pouvoir", "vouloir", "décider", "commencer", "devoir", "essayer")
_ONSETS = ("b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "ch", "tr", "pl", "gr")
_NUCLEI = ("a", "e", "i", "o", "u", "ou", "ai", "é", "an", "on")


class SynthConfigError(CorpusError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_docs: int = 20
    sentences_per_doc: int = 10
    vocab_size: int = 200
    n_frames: int = 3
    fes_per_frame: int = 4
    lus_per_frame: int = 2
    ambiguous_lus: int = 0
    verbal_fraction: float = 0.65
    root_fraction: float = 0.3
    max_depth: int = 3
    mean_length: float = 12.0
    length_sd: float = 3.0
    doc_jitter: float = 0.0       # per-document spread of the verbal/root fractions
    second_instance_rate: float = 0.0
    source: str = "synth"

    def check(self):
        if self.n_docs < 1 or self.sentences_per_doc < 1:
            raise SynthConfigError("need at least one document and one sentence per document")
        if not 1 <= self.n_frames <= len(FRAME_POOL):
            raise SynthConfigError(f"n_frames must be in [1, {len(FRAME_POOL)}]")
        if not 1 <= self.fes_per_frame <= len(FE_POOL):
            raise SynthConfigError(f"fes_per_frame must be in [1, {len(FE_POOL)}]")
        if self.fes_per_frame - 2 > len(PREPOSITIONS):
            raise SynthConfigError("not enough prepositions to realize every FE")
        if self.lus_per_frame < 2:
            raise SynthConfigError("each frame needs a verbal and a nominal lexical unit")
        if self.ambiguous_lus > self.n_frames * self.lus_per_frame or (self.ambiguous_lus and self.n_frames < 2):
            raise SynthConfigError("too many ambiguous lexical units for the frame inventory")
        for name in ("verbal_fraction", "root_fraction", "second_instance_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SynthConfigError(f"{name} must be in [0, 1]")
        if self.max_depth < 1:
            raise SynthConfigError("max_depth must be at least 1")
        if self.mean_length < self.max_depth + 2:
            raise SynthConfigError(
                f"mean_length {self.mean_length} cannot hold a trigger, one FE and a depth-{self.max_depth} chain")
        if self.length_sd < 0 or self.doc_jitter < 0:
            raise SynthConfigError("length_sd and doc_jitter must be non-negative")
        if self.vocab_size < 20:
            raise SynthConfigError("vocab_size must be at least 20")

    def to_dict(self):
        return asdict(self)


def _pseudo_words(rng, n, taken):
    words = []
    while len(words) < n:
        k = int(rng.integers(2, 4))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _NUCLEI[rng.integers(len(_NUCLEI))] for _ in range(k))
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


class _Inventory:
    """Frames, lexical units and the open-class vocabulary for one config."""

    def __init__(self, config: SynthConfig, rng):
        taken = set(PREPOSITIONS) | set(SUPPORT_VERBS)
        self.frames = list(FRAME_POOL[:config.n_frames])
        extra = FE_POOL[2:]
        self.fes = {}
        for i, f in enumerate(self.frames):
            base = list(FE_POOL[:min(2, config.fes_per_frame)])
            need = config.fes_per_frame - len(base)
            picks = sorted(rng.choice(len(extra), size=need, replace=False).tolist()) if need else []
            self.fes[f] = tuple(base + [extra[j] for j in picks])
        self.lus = {f: [] for f in self.frames}  # frame -> [(lemma, 'V'|'N')]
        for f in self.frames:
            stems = _pseudo_words(rng, config.lus_per_frame, taken)
            for j, stem in enumerate(stems):
                pos = "V" if j % 2 == 0 else "N"
                self.lus[f].append((stem + ("er" if pos == "V" else "tion"), pos))
        self.extra_frames = {}  # lemma -> additional frames (ambiguous LUs)
        all_lus = [(f, lu) for f in self.frames for lu in self.lus[f]]
        for k in range(config.ambiguous_lus):
            f, lu = all_lus[k]
            other = self.frames[(self.frames.index(f) + 1) % len(self.frames)]
            self.extra_frames.setdefault(lu, []).append(other)

        n_open = config.vocab_size - sum(len(v) for v in self.lus.values())
        n_open = max(n_open, 12)
        words = _pseudo_words(rng, n_open, taken)
        q = len(words)
        self.nouns = words[: q // 2]
        self.adjs = words[q // 2: q // 2 + q // 6]
        self.advs = words[q // 2 + q // 6: q // 2 + q // 3]
        self.propns = [w.capitalize() for w in words[q // 2 + q // 3:]]
        self.dets = ["le", "la", "les", "un", "une", "ce"]

    def lexicon(self, with_support_verbs: bool) -> FrameLexicon:
        entries = []
        for f in self.frames:
            trigs = list(self.lus[f])
            for lu, others in self.extra_frames.items():
                if f in others:
                    trigs.append(lu)
            entries.append((f, self.fes[f], trigs))
        # support verbs evoke frames through the second-instance mechanism
        for i, verb in enumerate(SUPPORT_VERBS if with_support_verbs else ()):
            f = self.frames[i % len(self.frames)]
            entries[self.frames.index(f)][2].append((verb, "V"))
        return build_lexicon(entries)


def _allocate(rng, n_docs, per_doc, base, jitter):
    """Per-document counts of 'true' flags, summing to round(base * total)."""
    total = n_docs * per_doc
    target = int(round(base * total))
    if jitter > 0:
        offsets = rng.normal(0.0, jitter, size=n_docs)
        offsets -= offsets.mean()
        fracs = np.clip(base + offsets, 0.0, 1.0)
    else:
        fracs = np.full(n_docs, base)
    counts = np.clip(np.round(fracs * per_doc).astype(int), 0, per_doc)
    while counts.sum() != target:
        if counts.sum() < target:
            cand = np.flatnonzero(counts < per_doc)
            counts[rng.choice(cand)] += 1
        else:
            cand = np.flatnonzero(counts > 0)
            counts[rng.choice(cand)] -= 1
    return counts


class _SentenceBuilder:
    """Accumulate tokens with symbolic heads, then lay them out linearly."""

    def __init__(self):
        self.nodes = []  # dicts: form, lemma, upos, morph, head (node id or None), deprel

    def add(self, form, lemma, upos, head, deprel, morph=()):
        self.nodes.append(dict(form=form, lemma=lemma, upos=upos, morph=tuple(morph), head=head, deprel=deprel))
        return len(self.nodes) - 1


def _verb_morph(rng):
    return ("VerbForm=Fin", f"Tense={rng.choice(['Past', 'Pres', 'Imp'])}") if rng.random() < 0.7 \
        else ("VerbForm=Inf",)


def _noun_morph(rng):
    return (f"Gender={rng.choice(['Masc', 'Fem'])}", f"Number={rng.choice(['Sing', 'Plur'])}")


def _inflect(rng, lemma, pos):
    if pos == "V":
        stem = lemma[:-2]
        return str(rng.choice([lemma, stem + "a", stem + "ait", stem + "ent"]))
    return str(rng.choice([lemma, lemma + "s"]))


def _fe_chunk(rng, inv, b, fe, trigger, head_deprel, prep, budget):
    """Build one FE realization (at most ``budget`` tokens); return its node ids."""
    ids = []
    if rng.random() < 0.25:
        if rng.random() < 0.5 or budget < 2:
            noun = b.add(str(rng.choice(inv.propns)), "", "PROPN", trigger, head_deprel)
            b.nodes[noun]["lemma"] = b.nodes[noun]["form"]
        else:
            year = str(int(rng.integers(1000, 2000)))
            noun = b.add(year, year, "NUM", trigger, head_deprel)
    else:
        lemma = str(rng.choice(inv.nouns))
        noun = b.add(lemma + ("s" if rng.random() < 0.3 else ""), lemma, "NOUN", trigger, head_deprel, _noun_morph(rng))
    used = 1
    if prep is not None:
        ids.append(b.add(prep, prep, "ADP", noun, "case"))
        used += 1
    if b.nodes[noun]["upos"] == "NOUN" and used < budget and rng.random() < 0.6:
        d = str(rng.choice(inv.dets))
        ids.append(b.add(d, d, "DET", noun, "det"))
        used += 1
    ids.append(noun)
    if b.nodes[noun]["upos"] == "NOUN" and used < budget and rng.random() < 0.3:
        a = str(rng.choice(inv.adjs))
        ids.append(b.add(a, a, "ADJ", noun, "amod"))
    elif b.nodes[noun]["upos"] == "PROPN" and used < budget and rng.random() < 0.4:
        p = str(rng.choice(inv.propns))
        ids.append(b.add(p, p, "PROPN", noun, "flat"))
    return ids


def _fe_min_len(fe_index):
    return 1 if fe_index < 2 else 2


def _make_sentence(rng, inv, config, sid, frame, verbal, root, second):
    depth = 0 if root else int(rng.integers(1, config.max_depth + 1))
    length = None
    for _ in range(20):
        cand = int(round(rng.normal(config.mean_length, config.length_sd)))
        if cand >= depth + 2:
            length = cand
            break
    if length is None:
        length = depth + 2
    budget = length - depth - 1

    fes = inv.fes[frame]
    order = list(rng.permutation(len(fes)))
    chosen = []
    left = budget
    for j in order:
        fe = fes[j]
        g = FE_POOL.index(fe)
        need = _fe_min_len(g)
        if need <= left and (not chosen or rng.random() < 0.75):
            chosen.append((g, fe))
            left -= need
    if not chosen:
        # budget >= 1 always fits Agent/Theme; otherwise fall back to the shortest FE
        g, fe = min(((FE_POOL.index(fe), fe) for fe in fes), key=lambda x: _fe_min_len(x[0]))
        chosen = [(g, fe)]
        left = budget - _fe_min_len(g)
        if left < 0:
            length += -left
            left = 0
    chosen.sort()

    b = _SentenceBuilder()
    chain = []
    for k in range(depth):
        verb = str(rng.choice(SUPPORT_VERBS))
        head = chain[-1] if chain else None
        chain.append(b.add(_inflect(rng, verb, "V"), verb, "VERB", head,
                           "root" if head is None else "xcomp", _verb_morph(rng)))
    lemma, pos = _pick_lu(rng, inv, frame, "V" if verbal else "N")
    trig_head = chain[-1] if chain else None
    if trig_head is None:
        trig_deprel = "root"
    else:
        trig_deprel = "xcomp" if verbal else "obj"
    trig = b.add(_inflect(rng, lemma, pos), lemma, "VERB" if verbal else "NOUN", trig_head, trig_deprel,
                 _verb_morph(rng) if verbal else _noun_morph(rng))

    before, after = [], []
    fe_nodes = {}
    spare = left
    for g, fe in chosen:
        if g == 0:
            deprel, prep = ("nsubj" if verbal else "nmod"), None
        elif g == 1:
            deprel, prep = ("obj" if verbal else "nmod"), None
        else:
            deprel, prep = ("obl" if verbal else "nmod"), PREPOSITIONS[g - 2]
        extra = int(rng.integers(0, min(spare, 2) + 1)) if spare > 0 else 0
        ids = _fe_chunk(rng, inv, b, fe, trig, deprel, prep, _fe_min_len(g) + extra)
        spare -= len(ids) - _fe_min_len(g)
        fe_nodes[fe] = ids
        (before if g == 0 else after).append(ids)

    # fillers: adverbs (some as two-word fixed expressions) and one final punctuation
    fillers = []
    n_fill = spare
    final_punct = n_fill > 0
    if final_punct:
        n_fill -= 1
    while n_fill > 0:
        if n_fill >= 2 and rng.random() < 0.2:
            a = str(rng.choice(inv.advs))
            h = b.add(a, a, "ADV", trig, "advmod")
            p = str(rng.choice(PREPOSITIONS))
            fillers.append([h, b.add(p, p, "ADP", h, "fixed")])
            n_fill -= 2
        elif rng.random() < 0.25:
            fillers.append([b.add(",", ",", "PUNCT", trig, "punct")])
            n_fill -= 1
        else:
            a = str(rng.choice(inv.advs))
            fillers.append([b.add(a, a, "ADV", trig, "advmod")])
            n_fill -= 1

    clause = before + [[trig]] + after
    for chunk in fillers:
        clause.insert(int(rng.integers(0, len(clause) + 1)), chunk)
    layout = [n for n in chain] + [n for chunk in clause for n in chunk]
    if final_punct:
        top = chain[0] if chain else trig
        layout.append(b.add(".", ".", "PUNCT", top, "punct"))

    pos_of = {node: i + 1 for i, node in enumerate(layout)}
    tokens = []
    for node in layout:
        d = b.nodes[node]
        head = 0 if d["head"] is None else pos_of[d["head"]]
        tokens.append(Token(pos_of[node], d["form"], d["lemma"], d["upos"], d["morph"], head, d["deprel"]))
    sent = Sentence(sid, tuple(tokens))

    t = pos_of[trig]
    elements = []
    for fe, ids in fe_nodes.items():
        idx = sorted(pos_of[i] for i in ids)
        elements.append((fe, (idx[0], idx[-1])))
    instances = [FrameInstance((t, t), frame, tuple(elements))]

    if second and chain:
        # the root support verb evokes its own frame, its Theme being the embedded clause
        verb_node = chain[0]
        verb = b.nodes[verb_node]["lemma"]
        other = inv.frames[SUPPORT_VERBS.index(verb) % len(inv.frames)]
        if "Theme" in inv.fes[other]:
            r = pos_of[verb_node]
            end = len(tokens) - (1 if final_punct else 0)
            if end > r:
                instances.append(FrameInstance((r, r), other, (("Theme", (r + 1, end)),)))
    return sent, instances


def _pick_lu(rng, inv, frame, pos):
    cands = [lu for lu in inv.lus[frame] if lu[1] == pos]
    return cands[int(rng.integers(len(cands)))]


def synth_corpus(config: SynthConfig | None = None, seed: int = 0):
    """Generate ``(documents, lexicon)``, fully determined by ``(config, seed)``.

    Verbal/root shares are allocated exactly over primary triggers; second
    instances (support-verb frames) are extra and are not counted there.
    """
    config = config or SynthConfig()
    config.check()
    rng = np.random.default_rng(seed)
    inv = _Inventory(config, rng)
    lex = inv.lexicon(config.second_instance_rate > 0)

    spd = config.sentences_per_doc
    verbal_counts = _allocate(rng, config.n_docs, spd, config.verbal_fraction, config.doc_jitter)
    root_counts = _allocate(rng, config.n_docs, spd, config.root_fraction, config.doc_jitter)
    docs = []
    for d in range(config.n_docs):
        verbal = np.zeros(spd, dtype=bool)
        verbal[: verbal_counts[d]] = True
        rng.shuffle(verbal)
        root = np.zeros(spd, dtype=bool)
        root[: root_counts[d]] = True
        rng.shuffle(root)
        sentences, annotations = [], {}
        for s in range(spd):
            frame = inv.frames[int(rng.integers(len(inv.frames)))]
            second = rng.random() < config.second_instance_rate
            sent, insts = _make_sentence(rng, inv, config, f"s{s + 1}", frame, bool(verbal[s]), bool(root[s]), second)
            sentences.append(sent)
            annotations[sent.id] = tuple(insts)
        docs.append(Document(f"doc{d + 1:04d}", tuple(sentences), annotations, config.source))
    return docs, lex
