"""``neuraltok`` command line: curate, train-teacher, distill, train, tokenize, eval, finetune-demo.

Every subcommand accepts ``--seed``, ``--config`` (a JSON object whose keys
are option names, with ``-`` or ``_``) and ``--out-dir``. Explicit flags win
over config values. The resolved options are written next to the outputs as
``<command>.config.json``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import corpus, distill, endtask, evalkit
from .errors import ConfigError, MalformedFileError, NeuralTokError
from .neural import TaggerConfig, load_checkpoint, save_checkpoint, train
from .segmentation import display
from .subword import UnigramTrainConfig, load_teacher, save_teacher, teacher_to_text, train_teacher

log = logging.getLogger("neuraltok")

TEACHER_KINDS = ("unigram", "bpe", "wordpiece")
_TAGGER_FLAGS = ("embed_dim", "hidden_out_dim", "layers", "lr_max", "t0_epochs", "t_mult", "epochs",
                 "weight_decay", "batch_size", "val_fraction")
_TASK_FLAGS = ("proj_dim", "hidden", "layers", "lr", "weight_decay", "epochs", "batch_size")
_UNIGRAM_FLAGS = tuple(f.name for f in fields(UnigramTrainConfig))


# helpers -------------------------------------------------------------------------

def _pairs(items: Sequence[str], default_key: str | None, what: str) -> list[tuple[str, str]]:
    """Parse ``KEY=PATH`` items; bare paths get ``default_key``."""
    out = []
    for item in items:
        key, sep, path = item.partition("=")
        if not sep:
            if default_key is None:
                raise ConfigError(f"{what} {item!r} needs the form LANG=PATH")
            key, path = default_key, item
        out.append((key, path))
    return out


def _write_config(args: argparse.Namespace, out_dir: Path, name: str) -> None:
    skip = {"func", "config", "command"}
    resolved = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{name}.config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")


def _read_words(path: str) -> list[str]:
    """Words of a word-table file (in table order) or, for plain text, unique words in order of appearance."""
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("#lang="):
        return list(corpus.WordTable.load(path).entries)
    return list(dict.fromkeys(corpus.extract_words(text)))


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# commands --------------------------------------------------------------------------

def cmd_curate(args) -> int:
    out = _out(args)
    by_lang: dict[str, list[str]] = {}
    for lang, path in _pairs(args.inputs, args.lang, "input"):
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        by_lang.setdefault(lang, []).extend(corpus.extract_words(raw, args.max_len))
    tables = []
    for lang in sorted(by_lang):
        table = corpus.build_word_table(by_lang[lang], lang)
        table.save(out / f"words.{lang}.tsv")
        tables.append(table)
        print(f"{lang}: {len(table)} unique words -> {out / f'words.{lang}.tsv'}")
    alphabet = corpus.build_alphabet(tables, args.min_char_count)
    alphabet.save(out / "alphabet.txt")
    print(f"alphabet: {len(alphabet)} symbols -> {out / 'alphabet.txt'}")
    _write_config(args, out, "curate")
    return 0


def cmd_train_teacher(args) -> int:
    out = _out(args)
    table = corpus.WordTable.load(args.table)
    ucfg = UnigramTrainConfig(**{k: getattr(args, k) for k in _UNIGRAM_FLAGS})
    model = train_teacher(args.kind, table, args.vocab_size, ucfg)
    path = out / f"teacher.{table.language}.{args.kind}.txt"
    save_teacher(model, path)
    if teacher_to_text(load_teacher(path)) != teacher_to_text(model):
        raise MalformedFileError(f"{path} does not round-trip")
    print(f"{args.kind} teacher ({table.language}) -> {path}")
    _write_config(args, out, f"teacher.{table.language}.{args.kind}")
    return 0


def cmd_distill(args) -> int:
    out = _out(args)
    tables = {}
    for path in args.tables:
        table = corpus.WordTable.load(path)
        if table.language in tables:
            tables[table.language] = tables[table.language].merge(table)
        else:
            tables[table.language] = table
    default = next(iter(tables)) if len(tables) == 1 else None
    teachers = {lang: load_teacher(path) for lang, path in _pairs(args.teachers, default, "teacher")}
    if set(tables) != set(teachers):
        raise ConfigError(f"languages differ: tables {sorted(tables)} vs teachers {sorted(teachers)}")
    alphabet = corpus.Alphabet.load(args.alphabet)
    examples = distill.build_dataset(tables, teachers, args.mode, alphabet, seed=args.seed)
    path = out / "dataset.jsonl"
    distill.save_dataset(examples, path, args.seed, args.mode)
    distill.load_dataset(path, alphabet)
    print(f"{len(examples)} examples ({args.mode}) -> {path}")
    _write_config(args, out, "distill")
    return 0


def cmd_train(args) -> int:
    out = _out(args)
    alphabet = corpus.Alphabet.load(args.alphabet)
    header, examples = distill.load_dataset(args.dataset, alphabet)
    cfg = TaggerConfig(seed=args.seed, **{k: getattr(args, k) for k in _TAGGER_FLAGS})
    result = train(examples, cfg, alphabet, log_path=out / "train_log.jsonl")
    extra = {"dataset_mode": header["#mode"], "best_epoch": result.best_epoch}
    save_checkpoint(result.model, out / "model.ntk", extra=extra)
    load_checkpoint(out / "model.ntk", alphabet)
    for rec in result.log:
        print(f"epoch {rec['epoch']}: train {rec['train_loss']:.4f} val {rec['val_loss']:.4f}")
    print(f"best epoch {result.best_epoch} -> {out / 'model.ntk'}")
    _write_config(args, out, "train")
    return 0


def cmd_tokenize(args) -> int:
    if args.teacher:
        model, lang = load_teacher(args.teacher), None
    else:
        model, lang = load_checkpoint(args.checkpoint), args.lang
    src = open(args.input, encoding="utf-8") if args.input else sys.stdin
    with src:
        lines = [line.rstrip("\n") for line in src]
    words = [w for w in lines if w]
    segs = iter(evalkit.segment_all(evalkit.LangTokenizer(model, lang) if lang else model, words))
    for line in lines:
        print(display(line, next(segs)) if line else "")
    if args.out_dir:
        _write_config(args, _out(args), "tokenize")
    return 0


def _parse_grid(spec: str) -> list[float]:
    try:
        grid = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad noise grid {spec!r}") from exc
    if not grid or any(not 0 <= g <= 1 for g in grid):
        raise ConfigError("noise grid values must lie in [0, 1]")
    return grid


def cmd_eval(args) -> int:
    out = _out(args)
    tokenizers = {}
    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
        tokenizers["neural"] = evalkit.LangTokenizer(model, args.lang) if args.lang else model
        if args.vocab_table:
            table = corpus.WordTable.load(args.vocab_table)
            vocab = evalkit.neural_vocab_build(tokenizers["neural"], table, args.vocab_size)
            tokenizers["neural-vocab"] = evalkit.VocabNeuralTokenizer(tokenizers["neural"], vocab)
    for name, path in _pairs(args.teachers, None, "teacher"):
        tokenizers[name] = load_teacher(path)
    if not tokenizers:
        raise ConfigError("nothing to evaluate: pass --checkpoint and/or --teacher")
    words = _read_words(args.words)
    if args.max_words:
        words = words[: args.max_words]
    sentences = None
    if args.sentences:
        text = Path(args.sentences).read_text(encoding="utf-8").splitlines()
        sentences = [line.split() for line in text if line.split()]
    grid = _parse_grid(args.noise_grid)
    rows = evalkit.compare_report(tokenizers, words, sentences, grid, seed=args.seed)
    evalkit.write_report(rows, out / "report.json", out / "report.csv")
    sys.stdout.write(evalkit.report_csv(rows))
    _write_config(args, out, "eval")
    return 0


def cmd_finetune_demo(args) -> int:
    out = _out(args)
    tagger = load_checkpoint(args.checkpoint)
    if args.synthetic:
        data = endtask.synthetic_task(args.n_examples, seed=args.seed, typo_rate=args.typo_rate)
        split = int(len(data) * 0.8)
        train_data, test_data = data[:split], data[split:]
    else:
        if not args.data:
            raise ConfigError("pass --data TSV or --synthetic")
        train_data = endtask.read_task_tsv(args.data)
        test_data = endtask.read_task_tsv(args.test_data) if args.test_data else train_data
    n_classes = max(ex.label for ex in train_data + test_data) + 1
    cfg = endtask.TaskConfig(seed=args.seed, n_classes=max(2, n_classes),
                             freeze_tokenizer=args.freeze_tokenizer,
                             **{k: getattr(args, k) for k in _TASK_FLAGS})
    encoder = endtask.NeuralEncoder(tagger, args.lang)
    head = endtask.TaskHead(encoder.dim, cfg)
    before = endtask.evaluate_task(encoder, head, test_data)
    result = endtask.finetune(encoder, head, train_data, cfg, max_steps=args.max_steps)
    after = endtask.evaluate_task(result.encoder, result.head, test_data)
    delta = float(sum(np.linalg.norm(result.encoder.tagger.params[k].data - tagger.params[k].data)
                      for k in tagger.params))
    if args.freeze_tokenizer and delta != 0.0:
        raise NeuralTokError("frozen fine-tuning modified tokenizer parameters")
    metrics = {"accuracy_before": before, "accuracy_after": after, "tokenizer_param_delta": delta,
               "train_examples": len(train_data), "test_examples": len(test_data), "log": result.log}
    (out / "finetune_metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")
    if not args.freeze_tokenizer:
        save_checkpoint(result.encoder.tagger, out / "finetuned.ntk")
    print(f"accuracy before: {before:.4f}")
    print(f"accuracy after:  {after:.4f}")
    print(f"tokenizer parameter change: {delta:.6g}")
    _write_config(args, out, "finetune-demo")
    return 0


# parser ------------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file with option values; explicit flags win")
    p.add_argument("--out-dir", default="." if out_required else None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neuraltok", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curate", help="extract word tables and the alphabet from raw text")
    p.add_argument("inputs", nargs="+", help="text files, optionally as LANG=PATH")
    p.add_argument("--lang", help="language for inputs given without LANG=")
    p.add_argument("--max-len", type=int, default=corpus.DEFAULT_MAX_LEN)
    p.add_argument("--min-char-count", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("train-teacher", help="train a unigram, BPE or WordPiece teacher")
    p.add_argument("--kind", choices=TEACHER_KINDS, required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--vocab-size", type=int, default=30000)
    for f in fields(UnigramTrainConfig):
        p.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)
    _common(p)
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("distill", help="label word tables with teachers into a tagging dataset")
    p.add_argument("--tables", nargs="+", required=True)
    p.add_argument("--teachers", nargs="+", required=True, help="LANG=PATH (bare PATH for one language)")
    p.add_argument("--alphabet", required=True)
    p.add_argument("--mode", choices=[m.value for m in distill.Mode], default="mono")
    _common(p)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("train", help="train the tagger on a distilled dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--alphabet", required=True)
    defaults = TaggerConfig()
    for name in _TAGGER_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), type=type(getattr(defaults, name)),
                       default=getattr(defaults, name))
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tokenize", help="segment words read from stdin, one per line")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--teacher")
    p.add_argument("--lang")
    p.add_argument("--input", help="read words from this file instead of stdin")
    _common(p, out_required=False)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("eval", help="junk rate / subword count / self-F1 under a noise sweep")
    p.add_argument("--checkpoint")
    p.add_argument("--lang")
    p.add_argument("--teachers", nargs="*", default=[], help="NAME=PATH")
    p.add_argument("--words", required=True, help="word table or plain text file")
    p.add_argument("--sentences", help="one whitespace-separated sentence per line")
    p.add_argument("--max-words", type=int, default=0)
    p.add_argument("--noise-grid", default=",".join(str(g) for g in evalkit.DEFAULT_NOISE_GRID))
    p.add_argument("--vocab-table", help="word table for the vocabulary-based neural variant")
    p.add_argument("--vocab-size", type=int, default=30000)
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("finetune-demo", help="end-to-end task learning through the tokenizer")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--lang")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--data")
    p.add_argument("--test-data")
    p.add_argument("--n-examples", type=int, default=400)
    p.add_argument("--typo-rate", type=float, default=0.0)
    p.add_argument("--freeze-tokenizer", action="store_true")
    p.add_argument("--max-steps", type=int)
    task_defaults = endtask.TaskConfig()
    for name in _TASK_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), type=type(getattr(task_defaults, name)),
                       default=getattr(task_defaults, name))
    _common(p)
    p.set_defaults(func=cmd_finetune_demo)
    return parser


def _load_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Install a ``--config`` file's values as subcommand defaults so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    path = pre.parse_known_args(argv)[0].config
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if not path or command is None:
        return
    try:
        values = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError("config file must hold a JSON object")
    values = {k.replace("-", "_"): v for k, v in values.items()}
    sub = choices[command]
    dests = {a.dest for a in sub._actions}
    unknown = sorted(set(values) - dests - {"config"})
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {unknown}")
    for action in sub._actions:
        if action.dest in values:
            action.required = False
    sub.set_defaults(**values)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _load_config(parser, argv)
    except ConfigError as exc:
        print(f"neuraltok: error: {exc}", file=sys.stderr)
        return 1
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NeuralTokError, ValueError, OSError) as exc:
        print(f"neuraltok {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
