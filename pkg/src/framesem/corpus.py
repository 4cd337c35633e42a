"""Frame-annotated dependency treebanks: data model, file format, samples, splits.

The corpus format is a 10-column tab-separated layout close to CoNLL-U::

    INDEX FORM LEMMA UPOS MORPH HEAD DEPREL FRAMECOL FECOL SAMPLEID

A sentence holding several frame instances is written once per instance,
the repeated blocks sharing a ``# sent_id`` and differing in the last three
columns. A sentence without instances is written once with ``_`` there.
"""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .lexicon import FrameLexicon

Span = tuple[int, int]  # 1-based inclusive token range

OUTSIDE = "O"
N_COLUMNS = 10


class CorpusError(ValueError):
    pass


class CorpusFormatError(CorpusError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    lemma: str
    upos: str
    morph: tuple[str, ...] = ()
    head: int = 0
    deprel: str = "root"

    def __post_init__(self):
        object.__setattr__(self, "morph", tuple(sorted(self.morph)))


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        check_tree(self)

    def __len__(self):
        return len(self.tokens)

    def __getitem__(self, index: int) -> Token:
        """1-based token access."""
        return self.tokens[index - 1]

    def depth(self, index: int) -> int:
        """Number of head hops from token ``index`` to the root."""
        d = 0
        head = self[index].head
        while head != 0:
            d += 1
            head = self[head].head
        return d


@dataclass(frozen=True)
class FrameInstance:
    trigger: Span
    frame: str
    elements: tuple[tuple[str, Span], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "trigger", tuple(self.trigger))
        elements = tuple((label, tuple(span)) for label, span in self.elements)
        object.__setattr__(self, "elements", tuple(sorted(elements, key=lambda e: (e[1], e[0]))))
        a, b = self.trigger
        if a < 1 or b < a:
            raise CorpusError(f"empty or invalid trigger span {self.trigger}")
        for label, (s, e) in self.elements:
            if s < 1 or e < s:
                raise CorpusError(f"invalid span {(s, e)} for FE {label!r}")

    def check_bounds(self, n: int):
        spans = [self.trigger] + [span for _, span in self.elements]
        for a, b in spans:
            if b > n:
                raise CorpusError(f"span {(a, b)} exceeds sentence length {n}")


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[Sentence, ...]
    annotations: Mapping[str, tuple[FrameInstance, ...]] = field(default_factory=dict)
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        by_id = {s.id: s for s in self.sentences}
        if len(by_id) != len(self.sentences):
            raise CorpusError(f"document {self.id!r}: duplicate sentence id")
        annotations = {}
        for sid, instances in self.annotations.items():
            if sid not in by_id:
                raise CorpusError(f"document {self.id!r}: annotation references unknown sentence {sid!r}")
            for inst in instances:
                inst.check_bounds(len(by_id[sid]))
            if instances:
                annotations[sid] = tuple(instances)
        object.__setattr__(self, "annotations", annotations)

    def sentence(self, sid: str) -> Sentence:
        for s in self.sentences:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def instances(self):
        """Yield (sentence, instance) pairs in document order."""
        for s in self.sentences:
            for inst in self.annotations.get(s.id, ()):
                yield s, inst

    @property
    def n_triggers(self) -> int:
        return sum(len(v) for v in self.annotations.values())


def check_tree(sentence: Sentence):
    n = len(sentence.tokens)
    for i, tok in enumerate(sentence.tokens, start=1):
        if tok.index != i:
            raise CorpusError(f"sentence {sentence.id!r}: token indices are not contiguous 1..{n}")
        if not 0 <= tok.head <= n:
            raise CorpusError(f"sentence {sentence.id!r}: token {i} has dangling head {tok.head}")
        if tok.head == i:
            raise CorpusError(f"sentence {sentence.id!r}: token {i} is its own head")
    roots = [t.index for t in sentence.tokens if t.head == 0]
    if n and len(roots) != 1:
        raise CorpusError(f"sentence {sentence.id!r}: expected exactly one root, found {len(roots)}")
    for tok in sentence.tokens:
        seen = set()
        head = tok.index
        while head != 0:
            if head in seen:
                raise CorpusError(f"sentence {sentence.id!r}: head cycle through token {tok.index}")
            seen.add(head)
            head = sentence.tokens[head - 1].head


# -- reading -------------------------------------------------------------------


def _read_runs(labels: Sequence[str], what: str, first_lineno: int):
    """Group a B/I/_ column into (name, start, end) runs with 1-based indices."""
    runs: list[list] = []
    for i, lab in enumerate(labels, start=1):
        if lab == "_":
            continue
        prefix, _, name = lab.partition("-")
        if prefix not in ("B", "I") or not name:
            raise CorpusFormatError(f"bad {what} label {lab!r}", first_lineno + i - 1)
        if prefix == "I":
            if not runs or runs[-1][0] != name or runs[-1][2] != i - 1:
                raise CorpusFormatError(f"{what} label {lab!r} does not continue a span", first_lineno + i - 1)
            runs[-1][2] = i
        else:
            runs.append([name, i, i])
    return [tuple(r) for r in runs]


@dataclass
class _Block:
    lineno: int
    doc: int
    sent_id: str | None
    rows: list[tuple[int, list[str]]] = field(default_factory=list)


def _block_tokens(block: _Block) -> tuple[Token, ...]:
    tokens = []
    for lineno, cols in block.rows:
        try:
            index = int(cols[0])
            head = int(cols[5])
        except ValueError:
            raise CorpusFormatError("INDEX and HEAD must be integers", lineno) from None
        if index != len(tokens) + 1:
            raise CorpusFormatError(f"non-contiguous token index {index}", lineno)
        morph = () if cols[4] == "_" else tuple(cols[4].split("|"))
        tokens.append(Token(index, cols[1], cols[2], cols[3], morph, head, cols[6]))
    n = len(tokens)
    for (lineno, _), tok in zip(block.rows, tokens):
        if not 0 <= tok.head <= n:
            raise CorpusFormatError(f"dangling head {tok.head} in a {n}-token sentence", lineno)
        if tok.head == tok.index:
            raise CorpusFormatError(f"token {tok.index} is its own head", lineno)
    return tuple(tokens)


def _block_instance(block: _Block) -> FrameInstance | None:
    sample_ids = {cols[9] for _, cols in block.rows}
    if len(sample_ids) != 1:
        raise CorpusFormatError("SAMPLEID differs within one block", block.lineno)
    first = block.rows[0][0]
    frame_runs = _read_runs([c[7] for _, c in block.rows], "frame", first)
    fe_runs = _read_runs([c[8] for _, c in block.rows], "FE", first)
    if sample_ids == {"_"}:
        if frame_runs or fe_runs:
            raise CorpusFormatError("annotated block without SAMPLEID", block.lineno)
        return None
    if len(frame_runs) != 1:
        raise CorpusFormatError(f"expected exactly one trigger span, found {len(frame_runs)}", block.lineno)
    frame, a, b = frame_runs[0]
    labels = Counter(name for name, _, _ in fe_runs)
    repeated = sorted(name for name, c in labels.items() if c > 1)
    if repeated:
        raise CorpusFormatError(f"discontiguous FE span(s) {repeated}", block.lineno)
    return FrameInstance((a, b), frame, tuple((name, (s, e)) for name, s, e in fe_runs))


def parse_corpus(stream: TextIO | str) -> list[Document]:
    """Parse the extended column format into documents.

    Raises :class:`CorpusFormatError` naming the offending line on any
    malformed input; nothing is returned on failure.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    docs: list[dict] = []
    blocks: list[_Block] = []
    current: _Block | None = None
    pending_sent_id: str | None = None

    def close():
        nonlocal current, pending_sent_id
        if current is not None and current.rows:
            blocks.append(current)
        current = None
        pending_sent_id = None

    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            close()
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            key, value = key.strip(), value.strip()
            if not sep:
                continue
            if key == "doc_id":
                close()
                docs.append({"id": value, "source": "", "lineno": lineno})
            elif key == "source":
                if not docs:
                    raise CorpusFormatError("source header before any doc_id", lineno)
                docs[-1]["source"] = value
            elif key == "sent_id":
                if current is not None and current.rows:
                    close()
                pending_sent_id = value
            continue
        cols = line.split("\t")
        if len(cols) != N_COLUMNS:
            raise CorpusFormatError(f"expected {N_COLUMNS} columns, got {len(cols)}", lineno)
        if current is None:
            if not docs:
                raise CorpusFormatError("token line before any doc_id header", lineno)
            current = _Block(lineno, len(docs) - 1, pending_sent_id)
        current.rows.append((lineno, cols))
    close()

    grouped: list[tuple[list[Sentence], dict[str, list[FrameInstance]]]] = [([], {}) for _ in docs]
    seen_tokens: list[dict[str, tuple[Token, ...]]] = [{} for _ in docs]
    seen_samples: list[dict[str, set]] = [{} for _ in docs]
    for block in blocks:
        sentences, annotations = grouped[block.doc]
        sid = block.sent_id if block.sent_id is not None else f"s{len(sentences) + 1}"
        tokens = _block_tokens(block)
        inst = _block_instance(block)
        known = seen_tokens[block.doc]
        if sid in known:
            if known[sid] != tokens:
                raise CorpusFormatError(
                    f"annotation block for sentence {sid!r} does not repeat its tokens", block.lineno)
            if inst is None:
                raise CorpusFormatError(f"repeated block for sentence {sid!r} carries no instance", block.lineno)
        else:
            try:
                sentences.append(Sentence(sid, tokens))
            except CorpusError as err:
                raise CorpusFormatError(str(err), block.lineno) from None
            known[sid] = tokens
        if inst is not None:
            sample_id = block.rows[0][1][9]
            used = seen_samples[block.doc].setdefault(sid, set())
            if sample_id in used:
                raise CorpusFormatError(f"duplicate SAMPLEID {sample_id} for sentence {sid!r}", block.lineno)
            used.add(sample_id)
            try:
                inst.check_bounds(len(tokens))
            except CorpusError as err:
                raise CorpusFormatError(str(err), block.lineno) from None
            annotations.setdefault(sid, []).append(inst)

    out = []
    for meta, (sentences, annotations) in zip(docs, grouped):
        try:
            out.append(Document(meta["id"], tuple(sentences),
                                {k: tuple(v) for k, v in annotations.items()}, meta["source"]))
        except CorpusError as err:
            raise CorpusFormatError(str(err), meta["lineno"]) from None
    return out


def read_corpus(path) -> list[Document]:
    with open(path, encoding="utf-8") as f:
        return parse_corpus(f)


# -- writing -------------------------------------------------------------------


def _bio_column(n: int, runs: Iterable[tuple[str, Span]]) -> list[str]:
    col = ["_"] * n
    for name, (a, b) in runs:
        col[a - 1] = f"B-{name}"
        for i in range(a, b):
            col[i] = f"I-{name}"
    return col


def serialize_corpus(docs: Iterable[Document]) -> str:
    out = []
    for doc in docs:
        out.append(f"# doc_id = {doc.id}\n")
        if doc.source:
            out.append(f"# source = {doc.source}\n")
        for sent in doc.sentences:
            instances = doc.annotations.get(sent.id, ())
            n = len(sent)
            layers = [(_bio_column(n, [(i.frame, i.trigger)]), _bio_column(n, i.elements), str(k))
                      for k, i in enumerate(instances, start=1)]
            if not layers:
                layers = [(["_"] * n, ["_"] * n, "_")]
            for frame_col, fe_col, sample_id in layers:
                out.append(f"# sent_id = {sent.id}\n")
                for tok, fc, ec in zip(sent.tokens, frame_col, fe_col):
                    morph = "|".join(tok.morph) if tok.morph else "_"
                    out.append("\t".join([str(tok.index), tok.form, tok.lemma, tok.upos, morph,
                                          str(tok.head), tok.deprel, fc, ec, sample_id]) + "\n")
                out.append("\n")
    return "".join(out)


def write_corpus(docs: Iterable[Document], path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize_corpus(docs))


# -- validation ----------------------------------------------------------------


def validate_document(doc: Document, lex: FrameLexicon) -> list[str]:
    issues = []
    for sent, inst in doc.instances():
        if inst.frame not in lex.frames:
            issues.append(f"{doc.id}/{sent.id}: unknown frame {inst.frame!r}")
            continue
        allowed = set(lex.frames[inst.frame])
        for label, _ in inst.elements:
            if label not in allowed:
                issues.append(f"{doc.id}/{sent.id}: FE {label!r} not admissible for frame {inst.frame!r}")
    return issues


# -- tagging samples -----------------------------------------------------------


def frame_label(prefix: str, frame: str) -> str:
    return f"{prefix}-frame:{frame}"


def fe_label(prefix: str, fe: str) -> str:
    return f"{prefix}-fe:{fe}"


def split_label(label: str) -> tuple[str, str, str]:
    """``'B-fe:Time'`` -> ``('B', 'fe', 'Time')``; ``'O'`` -> ``('O', '', '')``."""
    if label == OUTSIDE:
        return OUTSIDE, "", ""
    prefix, _, rest = label.partition("-")
    kind, _, name = rest.partition(":")
    return prefix, kind, name


def is_bio_valid(labels: Sequence[str]) -> bool:
    prev = OUTSIDE
    for lab in labels:
        if lab.startswith("I-"):
            body = lab[2:]
            if prev not in (f"B-{body}", f"I-{body}"):
                return False
        prev = lab
    return True


@dataclass(frozen=True)
class TaggingSample:
    sentence: Sentence
    trigger: Span
    gold_labels: tuple[str, ...]
    instance: FrameInstance
    doc_id: str = ""


def instance_labels(n: int, inst: FrameInstance) -> tuple[str, ...]:
    labels = [OUTSIDE] * n
    spans = sorted(span for _, span in inst.elements)
    for (a1, b1), (a2, b2) in zip(spans, spans[1:]):
        if a2 <= b1:
            raise CorpusError(f"overlapping FE spans {(a1, b1)} and {(a2, b2)} in frame {inst.frame!r}")
    ta, tb = inst.trigger
    for label, (a, b) in inst.elements:
        if a <= tb and ta <= b:
            raise CorpusError(f"FE {label!r} span {(a, b)} overlaps the trigger {inst.trigger}")
        labels[a - 1] = fe_label("B", label)
        for i in range(a, b):
            labels[i] = fe_label("I", label)
    labels[ta - 1] = frame_label("B", inst.frame)
    for i in range(ta, tb):
        labels[i] = frame_label("I", inst.frame)
    return tuple(labels)


def generate_samples(doc: Document) -> list[TaggingSample]:
    """One sample per frame instance; other instances stay unlabeled."""
    return [TaggingSample(sent, inst.trigger, instance_labels(len(sent), inst), inst, doc.id)
            for sent, inst in doc.instances()]


class LabelSet:
    """Ordered label inventory with ``O`` at id 0."""

    def __init__(self, labels: Sequence[str]):
        labels = list(labels)
        if not labels or labels[0] != OUTSIDE:
            raise CorpusError("label set must start with 'O'")
        if len(set(labels)) != len(labels):
            raise CorpusError("label set contains duplicates")
        present = set(labels)
        missing = sorted("B-" + lab[2:] for lab in labels if lab.startswith("I-") and "B-" + lab[2:] not in present)
        if missing:
            raise CorpusError(f"label set not closed under B/I pairing: missing {missing}")
        self.labels = tuple(labels)
        self.index = {lab: i for i, lab in enumerate(labels)}

    @classmethod
    def from_names(cls, frames: Iterable[str], fes: Iterable[str]) -> "LabelSet":
        labels = [OUTSIDE]
        for f in sorted(set(frames)):
            labels += [frame_label("B", f), frame_label("I", f)]
        for fe in sorted(set(fes)):
            labels += [fe_label("B", fe), fe_label("I", fe)]
        return cls(labels)

    @classmethod
    def from_lexicon(cls, lex: FrameLexicon) -> "LabelSet":
        return cls.from_names(lex.frames, lex.fe_names)

    @classmethod
    def from_samples(cls, samples: Iterable[TaggingSample]) -> "LabelSet":
        frames, fes = set(), set()
        for s in samples:
            frames.add(s.instance.frame)
            fes.update(label for label, _ in s.instance.elements)
        return cls.from_names(frames, fes)

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i: int) -> str:
        return self.labels[i]

    def __eq__(self, other):
        return isinstance(other, LabelSet) and self.labels == other.labels

    def __repr__(self):
        return f"LabelSet({len(self.labels)} labels)"

    def encode(self, labels: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self.index[lab] for lab in labels], dtype=np.int64)
        except KeyError as err:
            raise CorpusError(f"label {err.args[0]!r} not in label set") from None

    def frame_names(self) -> list[str]:
        return sorted({split_label(lab)[2] for lab in self.labels if split_label(lab)[1] == "frame"})

    def fe_names(self) -> list[str]:
        return sorted({split_label(lab)[2] for lab in self.labels if split_label(lab)[1] == "fe"})


# -- splits --------------------------------------------------------------------


def frame_counts(docs: Iterable[Document]) -> Counter:
    c = Counter()
    for doc in docs:
        for _, inst in doc.instances():
            c[inst.frame] += 1
    return c


def split_corpus(docs: Sequence[Document], test_fraction: float, seed: int,
                 tolerance: float = 0.10, min_instances: int = 5, max_tries: int = 1000):
    """Document-level train/test split keeping per-frame test shares near ``test_fraction``.

    Frames with at least ``min_instances`` instances must land within
    ``tolerance`` of the requested share; documents are reshuffled up to
    ``max_tries`` times.
    """
    if not 0 < test_fraction < 1:
        raise CorpusError("test_fraction must be in (0, 1)")
    n = len(docs)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test > n - 1:
        raise CorpusError(f"cannot split {n} document(s) at test fraction {test_fraction}")
    per_doc = [frame_counts([d]) for d in docs]
    total = frame_counts(docs)
    checked = [f for f, c in total.items() if c >= min_instances]

    rng = np.random.default_rng(seed)
    worst_seen = (np.inf, None)
    for _ in range(max_tries):
        perm = rng.permutation(n)
        test_idx = set(perm[:n_test].tolist())
        test_counts = Counter()
        for i in test_idx:
            test_counts.update(per_doc[i])
        dev, frame = 0.0, None
        for f in checked:
            d = abs(test_counts[f] / total[f] - test_fraction)
            if d > dev:
                dev, frame = d, f
        if dev <= tolerance + 1e-12:
            train = [d for i, d in enumerate(docs) if i not in test_idx]
            test = [d for i, d in enumerate(docs) if i in test_idx]
            return train, test
        if dev < worst_seen[0]:
            worst_seen = (dev, frame)
    dev, frame = worst_seen
    raise CorpusError(
        f"no split within ±{tolerance:.2f} after {max_tries} tries; best attempt deviates "
        f"by {dev:.3f} on frame {frame!r}")


def kfold_split(docs: Sequence[Document], k: int, seed: int):
    if k < 2:
        raise CorpusError("k must be at least 2")
    if len(docs) < k:
        raise CorpusError(f"k={k} exceeds the number of documents ({len(docs)})")
    perm = np.random.default_rng(seed).permutation(len(docs))
    folds = []
    for part in np.array_split(perm, k):
        held = set(part.tolist())
        train = [d for i, d in enumerate(docs) if i not in held]
        test = [d for i, d in enumerate(docs) if i in held]
        folds.append((train, test))
    return folds
