"""Command-line entry point: ``framesem <command> [options]``.

Every command accepts ``--seed``, ``--out`` and ``--config FILE``. A config
file holds ``key = value`` lines that override the command defaults;
explicit flags override the file. The resolved options are echoed to
``manifest.json`` in the output directory.

Exit codes: 0 ok, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import load_model, save_model
from .complexity import analyze, document_records, write_ranking, write_scatter, write_trace
from .corpus import kfold_split, read_corpus, validate_document, write_corpus
from .decoder import read_predictions, write_predictions
from .encoder import DEFAULT_DIMS
from .evaluator import (FACTORS, METRICS, align_units, breakdown, evaluate, fe_label_scores, fe_vs_traincount,
                        pr_curve, train_fe_counts, unit_frame_accuracy, write_pr_csv, write_tsv)
from .lexicon import dump_lexicon, load_lexicon
from .pipeline import fit_model, label_set_diff, predict_documents
from .synth import SynthConfig, synth_corpus
from .tagger import TrainConfig

log = logging.getLogger("framesem")


class UsageError(Exception):
    pass


TRAIN_DEFAULTS = {
    "epochs": 50,
    "batch_size": 1,
    "lr": 1e-3,
    "clip_norm": 5.0,
    "patience": 5,
    "hidden": 64,
    "layers": 4,
    "word_dim": DEFAULT_DIMS["word"],
    "feature_dim": DEFAULT_DIMS["pos"],
    "capshape_dim": DEFAULT_DIMS["capshape"],
    "min_count": 1,
}

DEFAULTS = {
    "train": dict(TRAIN_DEFAULTS),
    "predict": {"threshold": 0.0},
    "evaluate": {"threshold": 0.0, "pr_step": 0.05},
    "analyze": dict(TRAIN_DEFAULTS, folds=5, metric="soft", min_triggers=30, cv_folds=5, threshold=0.0),
    "synth": {f.name: f.default for f in fields(SynthConfig)},
    "validate": {},
}

# paths each command reads; (flag, required)
INPUTS = {
    "train": [("corpus", True), ("lexicon", True), ("dev", False)],
    "predict": [("model", True), ("corpus", True), ("lexicon", False)],
    "evaluate": [("predictions", True), ("corpus", True), ("lexicon", True), ("train_corpus", False)],
    "analyze": [("corpus", True), ("lexicon", True), ("predictions", False)],
    "synth": [],
    "validate": [("corpus", True), ("lexicon", True)],
}


def _option_flag(name):
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="key=value file overriding defaults")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="framesem", description="Frame semantic parsing with a highway LSTM tagger.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "train": "train a tagger and write a model bundle",
        "predict": "decode every gold trigger of a corpus",
        "evaluate": "score predictions against gold",
        "analyze": "document complexity study (k-fold driver)",
        "synth": "write a synthetic corpus and lexicon",
        "validate": "check a corpus against a lexicon",
    }
    for cmd, text in helps.items():
        p = sub.add_parser(cmd, parents=[common], help=text, description=text)
        for name, required in INPUTS[cmd]:
            p.add_argument(_option_flag(name), dest=name, required=required, metavar="PATH")
        for name, default in DEFAULTS[cmd].items():
            kind = type(default)
            p.add_argument(_option_flag(name), dest=name, type=kind if kind is not bool else _parse_bool,
                           default=None, help=f"default {default!r}")
    return parser


def _parse_bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config_file(path, defaults: dict) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in defaults:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r} (known: {', '.join(sorted(defaults))})")
        kind = type(defaults[key])
        try:
            out[key] = _parse_bool(value) if kind is bool else kind(value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def resolve_options(args) -> dict:
    defaults = DEFAULTS[args.command]
    opts = dict(defaults)
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"config file not found: {args.config}")
        opts.update(read_config_file(args.config, defaults))
    for name in defaults:
        value = getattr(args, name)
        if value is not None:
            opts[name] = value
    return opts


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _input_paths(args) -> dict:
    paths = {}
    for name, _ in INPUTS[args.command]:
        value = getattr(args, name)
        if value is None:
            continue
        if not Path(value).exists():
            raise UsageError(f"--{name.replace('_', '-')}: no such file or directory: {value}")
        paths[name] = value
    return paths


def write_manifest(out: Path, command: str, seed: int, opts: dict, inputs: dict):
    digests = {}
    for name, p in sorted(inputs.items()):
        p = Path(p)
        if p.is_dir():
            digests[name] = {f.name: _sha256(f) for f in sorted(p.iterdir()) if f.is_file()}
        else:
            digests[name] = _sha256(p)
    doc = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "options": opts,
        "inputs": {name: str(p) for name, p in sorted(inputs.items())},
        "input_sha256": digests,
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _train_settings(opts):
    tc = TrainConfig(epochs=opts["epochs"], batch_size=opts["batch_size"], lr=opts["lr"],
                     clip_norm=opts["clip_norm"], patience=opts["patience"])
    dims = {ch: opts["feature_dim"] for ch in DEFAULT_DIMS}
    dims["word"] = opts["word_dim"]
    dims["capshape"] = opts["capshape_dim"]
    hidden = (opts["hidden"],) * opts["layers"]
    directions = tuple("FB"[k % 2] for k in range(opts["layers"]))
    return tc, dims, hidden, directions


def _fit(train_docs, lex, opts, seed, dev_docs=None):
    tc, dims, hidden, directions = _train_settings(opts)
    return fit_model(train_docs, lex, tc, seed, hidden, directions, dims, opts["min_count"], dev_docs)


def _load_lexicon(path):
    return load_lexicon(Path(path).read_text(encoding="utf-8"))


def _check_corpus(docs, lex, what):
    issues = [f"{d.id}: {msg}" for d in docs for msg in validate_document(d, lex)]
    if issues:
        head = "\n  ".join(issues[:10])
        more = f"\n  ... {len(issues) - 10} more" if len(issues) > 10 else ""
        raise ValueError(f"{what} does not agree with the lexicon:\n  {head}{more}")


# -- commands ------------------------------------------------------------------


def cmd_train(args, opts, out: Path):
    lex = _load_lexicon(args.lexicon)
    docs = read_corpus(args.corpus)
    _check_corpus(docs, lex, "training corpus")
    dev = None
    if args.dev:
        dev = read_corpus(args.dev)
        _check_corpus(dev, lex, "dev corpus")
    model, history = _fit(docs, lex, opts, args.seed, dev)
    model.extra = {"options": opts}
    save_model(model, out)
    keys = ["epoch", "loss"] + (["dev_f"] if dev else [])
    with open(out / "history.tsv", "w", encoding="utf-8") as fh:
        write_tsv(fh, keys, ([h[k] for k in keys] for h in history))
    last = history[-1]
    print(f"trained {len(history)} epoch(s), final loss {last['loss']:.4f}; bundle written to {out}")


def cmd_predict(args, opts, out: Path):
    model = load_model(args.model)
    docs = read_corpus(args.corpus)
    if args.lexicon:
        lex = _load_lexicon(args.lexicon)
        if dump_lexicon(lex) != dump_lexicon(model.lexicon):
            raise ValueError("lexicon differs from the one stored in the bundle:\n"
                             + _text_diff(dump_lexicon(model.lexicon), dump_lexicon(lex)))
    diff = label_set_diff(model, docs)
    if diff:
        more = [f"... {len(diff) - 10} more"] if len(diff) > 10 else []
        raise ValueError(f"label set mismatch between bundle and corpus ({len(diff)} label(s)):\n  "
                         + "\n  ".join(diff[:10] + more))
    preds = predict_documents(model, docs, opts["threshold"])
    with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
        write_predictions(preds, fh)
    print(f"{len(preds)} prediction(s) written to {out / 'predictions.jsonl'}")


# Published figures for the full-scale CALOR setting. They are printed next to
# our numbers for orientation only; the CALOR corpus is not redistributable,
# so nothing here is expected to reproduce them.
CALOR_SCORES = {"soft": 69.5, "weighted": 60.9, "hard": 51.7}
CALOR_FRAME_ACCURACY = 0.97
CALOR_SUMMARY = {
    "n_documents": 735, "n_kept": 327, "mean_f": 69.0, "std_f": 6.5,
    "baseline_mse": 42.7, "model_mse": 25.1, "relative_reduction": 0.41, "r2": 0.46,
}


def _text_diff(a: str, b: str) -> str:
    import difflib
    return "".join(difflib.unified_diff(a.splitlines(True), b.splitlines(True), "bundle", "given"))


def _score_rows(units, threshold):
    rows = []
    for metric in METRICS:
        s = evaluate(units, metric, threshold)
        rows.append([metric, s.precision, s.recall, s.f_measure, s.hyp_count, s.ref_count])
    return rows


def _breakdown_rows(units, lex, threshold):
    rows = []
    for factor in FACTORS:
        for metric in METRICS:
            for row in breakdown(units, factor, metric, lex, threshold):
                s = row.score
                rows.append([factor, row.group, row.share, metric, s.precision, s.recall, s.f_measure])
    return rows


def cmd_evaluate(args, opts, out: Path):
    lex = _load_lexicon(args.lexicon)
    gold = read_corpus(args.corpus)
    with open(args.predictions, encoding="utf-8") as fh:
        preds = read_predictions(fh)
    units = align_units(gold, preds)
    t = opts["threshold"]
    scores = _score_rows(units, t)
    frame_acc = unit_frame_accuracy(units)
    rows = _breakdown_rows(units, lex, t)

    score_header = ["metric", "precision", "recall", "f", "hyp_count", "ref_count"]
    bd_header = ["factor", "group", "share", "metric", "precision", "recall", "f"]
    with open(out / "scores.tsv", "w", encoding="utf-8") as fh:
        write_tsv(fh, score_header, scores)
    with open(out / "breakdowns.tsv", "w", encoding="utf-8") as fh:
        write_tsv(fh, bd_header, rows)
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# overall (threshold {t:g}, {len(units)} instance(s))\n")
        write_tsv(fh, score_header, scores)
        fh.write(f"\n# frame accuracy\n{frame_acc:.6f}\n")
        for factor in FACTORS:
            fh.write(f"\n# breakdown: {factor}\n")
            write_tsv(fh, bd_header[1:], [r[1:] for r in rows if r[0] == factor])
        fh.write("\n# CALOR reference (published, full-scale; not reproduced here)\n")
        write_tsv(fh, ["metric", "f"], list(CALOR_SCORES.items()))
        fh.write(f"frame_accuracy\t{CALOR_FRAME_ACCURACY:.2f}\n")
        if args.train_corpus:
            per_fe = fe_label_scores(units, "soft", t)
            counts = train_fe_counts(read_corpus(args.train_corpus))
            table = fe_vs_traincount(per_fe, counts)
            fh.write("\n# soft F per FE label vs training count\n")
            write_tsv(fh, ["fe_label", "train_count", "f"], table)
            with open(out / "fe_traincount.tsv", "w", encoding="utf-8") as g:
                write_tsv(g, ["fe_label", "train_count", "f"], table)

    step = opts["pr_step"]
    if not 0 < step <= 1:
        raise UsageError("pr_step must be in (0, 1]")
    n = int(round(1.0 / step))
    thresholds = [round(i * step, 10) for i in range(n + 1) if i * step <= 1.0 + 1e-12]
    for metric in METRICS:
        with open(out / f"pr_{metric}.csv", "w", encoding="utf-8") as fh:
            write_pr_csv(fh, pr_curve(units, metric, thresholds))
    for metric, p, r, f, *_ in scores:
        print(f"{metric:8s} P {p:.4f}  R {r:.4f}  F {f:.4f}")
    print(f"frame accuracy {frame_acc:.4f}")


def cmd_analyze(args, opts, out: Path):
    lex = _load_lexicon(args.lexicon)
    docs = read_corpus(args.corpus)
    if args.predictions:
        with open(args.predictions, encoding="utf-8") as fh:
            preds = read_predictions(fh)
    else:
        _check_corpus(docs, lex, "corpus")
        preds_by_key = {}
        seeds = np.random.SeedSequence(args.seed).generate_state(opts["folds"])
        for fold, (train_docs, test_docs) in enumerate(kfold_split(docs, opts["folds"], args.seed)):
            model, _ = _fit(train_docs, lex, opts, int(seeds[fold]))
            for p in predict_documents(model, test_docs, opts["threshold"]):
                preds_by_key[(p.doc, p.sent, p.trigger)] = p
            log.info("fold %d/%d done", fold + 1, opts["folds"])
        preds = [preds_by_key[(d.id, s.id, tuple(i.trigger))] for d in docs for s, i in d.instances()]
        with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
            write_predictions(preds, fh)
    units = align_units(docs, preds)
    records = document_records(docs, units, opts["metric"])
    res = analyze(records, k=opts["cv_folds"], seed=args.seed, min_triggers=opts["min_triggers"])

    with open(out / "ranking.tsv", "w", encoding="utf-8") as fh:
        write_ranking(fh, res.ranking)
    with open(out / "trace.tsv", "w", encoding="utf-8") as fh:
        write_trace(fh, res.model)
    with open(out / "scatter.csv", "w", encoding="utf-8") as fh:
        write_scatter(fh, res.scatter)
    stats = [
        ("n_documents", res.n_documents), ("n_kept", res.n_kept),
        ("mean_f", res.mean_f), ("std_f", res.std_f),
        ("baseline_mse", res.baseline_mse), ("model_mse", res.model_mse),
        ("relative_reduction", res.relative_reduction), ("r2", res.r2),
        ("selected", ",".join(res.model.features) or "-"),
    ]
    with open(out / "summary.tsv", "w", encoding="utf-8") as fh:
        write_tsv(fh, ["key", "value", "calor_reference"], [(k, v, CALOR_SUMMARY.get(k, "-")) for k, v in stats])
    print(f"{res.n_kept}/{res.n_documents} document(s) kept; F {res.mean_f:.2f} ± {res.std_f:.2f}")
    if res.ranking:
        top = res.ranking[0]
        print(f"top feature {top.feature} (r = {top.r:+.3f})")
    print(f"cv MSE {res.baseline_mse:.3f} -> {res.model_mse:.3f} with {len(res.model.features)} feature(s)")


def cmd_synth(args, opts, out: Path):
    config = SynthConfig(**opts)
    docs, lex = synth_corpus(config, args.seed)
    write_corpus(docs, out / "corpus.txt")
    (out / "lexicon.tsv").write_text(dump_lexicon(lex), encoding="utf-8")
    print(f"{len(docs)} document(s), {sum(d.n_triggers for d in docs)} trigger(s) written to {out}")


def cmd_validate(args, opts, out):
    lex = _load_lexicon(args.lexicon)
    docs = read_corpus(args.corpus)
    issues = [f"{d.id}: {msg}" for d in docs for msg in validate_document(d, lex)]
    for line in issues:
        print(line)
    n = sum(d.n_triggers for d in docs)
    print(f"{len(docs)} document(s), {n} instance(s), {len(issues)} issue(s)")
    return 1 if issues else 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "synth": cmd_synth,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        opts = resolve_options(args)
        inputs = _input_paths(args)
        out = None
        if args.command != "validate":
            if not args.out:
                raise UsageError(f"{args.command} needs --out DIR")
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
    except UsageError as err:
        parser.error(str(err))
    try:
        if args.command == "synth":
            SynthConfig(**opts).check()
        code = COMMANDS[args.command](args, opts, out) or 0
        if out is not None:
            write_manifest(out, args.command, args.seed, opts, inputs)
        return code
    except UsageError as err:
        print(f"framesem {args.command}: usage error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # module errors surface as exit 1
        if args.verbose:
            log.exception("failed")
        print(f"framesem {args.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
