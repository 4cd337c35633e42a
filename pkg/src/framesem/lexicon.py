"""Frame inventory: admissible frame elements per frame and trigger lookup."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, TextIO

SMALL, MEDIUM, LARGE = "Small", "Medium", "Large"

VERBAL_UPOS = frozenset({"VERB"})
NOMINAL_UPOS = frozenset({"NOUN", "PROPN"})


class LexiconError(ValueError):
    pass


def coarse_pos(upos: str) -> str:
    """Map a UPOS tag to the coarse trigger class used for lookups (V or N).

    Tags outside the verbal/nominal classes are returned unchanged.
    """
    if upos in VERBAL_UPOS or upos == "V":
        return "V"
    if upos in NOMINAL_UPOS or upos == "N":
        return "N"
    return upos


@dataclass(frozen=True)
class FrameLexicon:
    frames: Mapping[str, tuple[str, ...]]
    triggers: Mapping[tuple[str, str], frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        for frame, fes in self.frames.items():
            if not fes:
                raise LexiconError(f"frame {frame!r} declares no frame elements")
            if len(set(fes)) != len(fes):
                raise LexiconError(f"frame {frame!r} lists a frame element twice")
        for (lemma, pos), frames in self.triggers.items():
            unknown = sorted(set(frames) - set(self.frames))
            if unknown:
                raise LexiconError(
                    f"trigger {lemma}/{pos} maps to undeclared frame(s) {unknown}")

    @property
    def frame_names(self) -> list[str]:
        return sorted(self.frames)

    @property
    def fe_names(self) -> list[str]:
        return sorted({fe for fes in self.frames.values() for fe in fes})

    def __contains__(self, frame: str) -> bool:
        return frame in self.frames


def parse_lexicon_line(line: str, lineno: int = 0):
    cols = line.rstrip("\r\n").split("\t")
    if len(cols) == 2:
        cols.append("")
    if len(cols) != 3:
        raise LexiconError(f"line {lineno}: expected 3 tab-separated columns, got {len(cols)}")
    frame, fe_col, trig_col = (c.strip() for c in cols)
    if not frame:
        raise LexiconError(f"line {lineno}: empty frame name")
    fes = tuple(fe.strip() for fe in fe_col.split(",") if fe.strip())
    if not fes:
        raise LexiconError(f"line {lineno}: frame {frame!r} has an empty FE list")
    triggers = []
    for item in trig_col.split(","):
        item = item.strip()
        if not item:
            continue
        lemma, sep, pos = item.rpartition("/")
        if not sep or not lemma or not pos:
            raise LexiconError(f"line {lineno}: malformed trigger {item!r} (expected lemma/POS)")
        triggers.append((lemma, coarse_pos(pos)))
    return frame, fes, triggers


def build_lexicon(entries: Iterable[tuple[str, Iterable[str], Iterable[tuple[str, str]]]]) -> FrameLexicon:
    frames: dict[str, tuple[str, ...]] = {}
    triggers: dict[tuple[str, str], set[str]] = {}
    for frame, fes, trigs in entries:
        if frame in frames:
            raise LexiconError(f"duplicate frame {frame!r}")
        frames[frame] = tuple(fes)
        for lemma, pos in trigs:
            triggers.setdefault((lemma, coarse_pos(pos)), set()).add(frame)
    return FrameLexicon(frames, {k: frozenset(v) for k, v in triggers.items()})


def load_lexicon(stream: TextIO | str) -> FrameLexicon:
    """Read the one-frame-per-line lexicon format.

    Each line is ``FRAME<TAB>fe1,fe2,...<TAB>lemma1/POS,lemma2/POS,...``.
    Blank lines and ``#`` comments are skipped.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    entries = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(stream, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        frame, fes, trigs = parse_lexicon_line(line, lineno)
        if frame in seen:
            raise LexiconError(f"line {lineno}: duplicate frame {frame!r} (first on line {seen[frame]})")
        seen[frame] = lineno
        entries.append((frame, fes, trigs))
    return build_lexicon(entries)


def dump_lexicon(lex: FrameLexicon) -> str:
    by_frame: dict[str, list[str]] = {f: [] for f in lex.frames}
    for (lemma, pos), frames in sorted(lex.triggers.items()):
        for f in sorted(frames):
            by_frame[f].append(f"{lemma}/{pos}")
    lines = [f"{f}\t{','.join(fes)}\t{','.join(by_frame[f])}" for f, fes in lex.frames.items()]
    return "".join(line + "\n" for line in lines)


def compatible_fes(lex: FrameLexicon, frame: str) -> frozenset[str]:
    try:
        return frozenset(lex.frames[frame])
    except KeyError:
        raise LexiconError(f"unknown frame {frame!r}") from None


def frames_for_trigger(lex: FrameLexicon, lemma: str, pos: str) -> frozenset[str]:
    return lex.triggers.get((lemma, coarse_pos(pos)), frozenset())


def size_class(n_fes: int) -> str:
    # boundaries: 1-7 small, 8-10 medium, 11+ large
    if n_fes <= 7:
        return SMALL
    if n_fes <= 10:
        return MEDIUM
    return LARGE


def frame_size_class(lex: FrameLexicon, frame: str) -> str:
    return size_class(len(compatible_fes(lex, frame)))
