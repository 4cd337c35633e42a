import pytest

from framesem import toy_paths
from framesem.corpus import read_corpus
from framesem.lexicon import load_lexicon
from framesem.synth import SynthConfig, synth_corpus


@pytest.fixture(scope="session")
def toy():
    corpus, lexicon = toy_paths()
    return read_corpus(corpus), load_lexicon(lexicon.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def small_synth():
    return synth_corpus(SynthConfig(n_docs=4, sentences_per_doc=6, vocab_size=80), seed=7)


def conll(rows, header="# doc_id = d1\n# sent_id = s1\n"):
    """Build corpus text from whitespace-separated token rows."""
    lines = ["\t".join(r.split()) for r in rows]
    return header + "\n".join(lines) + "\n"


# acceptance criteria register one line each; printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(n, name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {name}: {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
