"""Command-line surface: prepare, train, translate, evaluate, analyze.

Exit codes: 0 success, 1 user error (bad arguments, unreadable or empty
inputs), 2 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import traceback
from collections import Counter
from pathlib import Path

from . import analysis, metrics
from .checkpoint import ModelBundle, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, apply_overrides, load_config, write_manifest
from .corpus import (
    DatasetSplit,
    LexiconEntry,
    Vocabulary,
    build_vocab,
    clean_transcription,
    encode_pairs,
    lang_token,
    parse_inventory,
    parse_lexicon,
    split_train_val,
    tokenize_graphemes,
    write_lexicon,
)
from .decoding import beam_search, write_nbest
from .model import train_model


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; user errors are 1
        self.exit(1, f"{self.prog}: error: {message}\n")


def _comma_list(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """Every RunConfig field becomes an override flag; None means 'not given'."""
    parser.add_argument("--config", help="key = value config file or run manifest")
    for field in dataclasses.fields(RunConfig):
        flag = "--" + field.name.replace("_", "-")
        hint = str(field.type)
        if field.name == "language_filter":
            parser.add_argument(flag, dest=field.name, type=_comma_list, default=None,
                                help="comma-separated ISO 639-3 codes")
        elif "bool" in hint:
            parser.add_argument(flag, dest=field.name, action=argparse.BooleanOptionalAction,
                                default=None)
        elif "int" in hint:
            parser.add_argument(flag, dest=field.name, type=int, default=None)
        elif "float" in hint:
            parser.add_argument(flag, dest=field.name, type=float, default=None)
        else:
            parser.add_argument(flag, dest=field.name, default=None)


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {f.name: getattr(args, f.name, None) for f in dataclasses.fields(RunConfig)}
    return apply_overrides(config, overrides)


def _read_lexicon_file(path) -> tuple[list[LexiconEntry], int]:
    if path is None:
        raise UserError("no lexicon path given (set train_lexicon/test_lexicon)")
    p = Path(path)
    if not p.exists():
        raise UserError(f"cannot read lexicon {path}")
    with open(p, encoding="utf-8") as fh:
        entries, rejects = parse_lexicon(fh)
    for reject in rejects:
        print(f"{path}:{reject.line_no}: rejected: {reject.reason}", file=sys.stderr)
    return entries, len(rejects)


def _filter_languages(entries: list[LexiconEntry], config: RunConfig) -> list[LexiconEntry]:
    if config.language_filter is None:
        return entries
    if not config.language_filter:
        raise UserError("language filter is empty")
    keep = set(config.language_filter)
    filtered = [e for e in entries if e.lang in keep]
    if not filtered:
        raise UserError("no entries left after language filtering")
    return filtered


def _clean_entries(entries: list[LexiconEntry], config: RunConfig) -> list[LexiconEntry]:
    if not config.clean:
        return entries
    if config.inventory is None:
        raise UserError("cleaning requested but no inventory file configured")
    with open(config.inventory, encoding="utf-8") as fh:
        table = parse_inventory(fh)
    cleaned: list[LexiconEntry] = []
    warned: set[str] = set()
    for entry in entries:
        inventory = table.by_lang.get(entry.lang)
        if inventory is None:
            if entry.lang not in warned:
                warned.add(entry.lang)
                print(f"no inventory for {entry.lang}; transcriptions left as-is", file=sys.stderr)
            cleaned.append(entry)
            continue
        result = clean_transcription(entry.phonemes, inventory, table.features)
        cleaned.append(dataclasses.replace(entry, phonemes=result.phonemes))
    return cleaned


def _load_dataset(config: RunConfig) -> tuple[DatasetSplit, Vocabulary, Vocabulary]:
    entries, _ = _read_lexicon_file(config.train_lexicon)
    entries = _clean_entries(_filter_languages(entries, config), config)
    if not entries:
        raise UserError("empty training corpus")
    split = split_train_val(entries, cap=config.cap, val_fraction=config.val_fraction,
                            seed=config.seed)
    src_vocab = build_vocab(split.train, "source", config.min_count, lang_tokens=config.lang_token)
    tgt_vocab = build_vocab(split.train, "target", config.min_count)
    return split, src_vocab, tgt_vocab


# --- subcommands --------------------------------------------------------------


def cmd_prepare(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    split, src_vocab, tgt_vocab = _load_dataset(config)

    with open(out_dir / "train.tsv", "w", encoding="utf-8") as fh:
        write_lexicon(fh, split.train)
    with open(out_dir / "val.tsv", "w", encoding="utf-8") as fh:
        write_lexicon(fh, split.validation)
    src_vocab.save(out_dir / "src.vocab")
    tgt_vocab.save(out_dir / "tgt.vocab")

    train_counts = Counter(e.lang for e in split.train)
    val_counts = Counter(e.lang for e in split.validation)
    graphemes = {g for e in split.train for g in e.graphemes}
    phonemes = {p for e in split.train for p in e.phonemes}
    with open(out_dir / "stats.tsv", "w", encoding="utf-8") as fh:
        fh.write("lang\ttrain_words\tval_words\n")
        for lang in sorted(train_counts):
            fh.write(f"{lang}\t{train_counts[lang]}\t{val_counts.get(lang, 0)}\n")
        fh.write(f"TOTAL\t{sum(train_counts.values())}\t{sum(val_counts.values())}\n")
        fh.write(f"#languages\t{len(train_counts)}\n")
        fh.write(f"#distinct_graphemes\t{len(graphemes)}\n")
        fh.write(f"#distinct_phonemes\t{len(phonemes)}\n")

    write_manifest(out_dir / "run_manifest.json", "prepare", config,
                   {"train_lexicon": config.train_lexicon},
                   ["train.tsv", "val.tsv", "src.vocab", "tgt.vocab", "stats.tsv"])
    print(f"prepared {sum(train_counts.values())} train / {sum(val_counts.values())} val words "
          f"in {len(train_counts)} languages -> {out_dir}")
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(config.checkpoint_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    split, src_vocab, tgt_vocab = _load_dataset(config)

    params = None
    start_epoch = 1
    if args.resume:
        bundle = load_checkpoint(args.resume)
        params = bundle.params
        src_vocab, tgt_vocab = bundle.src_vocab, bundle.tgt_vocab
        model_config = bundle.config
        start_epoch = int(bundle.meta.get("epoch", 0)) + 1
        if start_epoch > config.epochs:
            raise UserError(f"checkpoint already trained for {start_epoch - 1} epochs")
    else:
        model_config = config.model_config(len(src_vocab), len(tgt_vocab))

    train_pairs = encode_pairs(split.train, src_vocab, tgt_vocab, config.lang_token)
    val_pairs = encode_pairs(split.validation, src_vocab, tgt_vocab, config.lang_token)
    languages = sorted({e.lang for e in split.train})
    print(f"training on {len(train_pairs)} words ({len(languages)} languages), "
          f"validating on {len(val_pairs)}", file=sys.stderr)

    log_path = out_dir / "training_log.tsv"
    mode = "a" if args.resume else "w"
    log_fh = open(log_path, mode, encoding="utf-8")
    if not args.resume:
        log_fh.write("epoch\tlr\ttrain_loss\tval_loss\n")

    def on_epoch(epoch, _params, stats):
        val = f"{stats.val_loss:.6f}" if stats.val_loss is not None else "-"
        log_fh.write(f"{epoch}\t{stats.lr:.6f}\t{stats.train_loss:.6f}\t{val}\n")
        log_fh.flush()
        print(f"epoch {epoch}: train {stats.train_loss:.4f} val {val}", file=sys.stderr)

    try:
        result = train_model(train_pairs, val_pairs, model_config, config.schedule(),
                             params=params, start_epoch=start_epoch, epoch_callback=on_epoch)
    finally:
        log_fh.close()

    def bundle_for(p, epoch):
        meta = {
            "lang_token": config.lang_token,
            "languages": languages,
            "epoch": epoch,
            "schedule": dataclasses.asdict(config.schedule()),
        }
        return ModelBundle(p, model_config, src_vocab, tgt_vocab, meta)

    save_checkpoint(out_dir / "final.mg2p", bundle_for(result.params, config.epochs))
    best = result.best_params if result.best_params is not None else result.params
    best_epoch = result.best_epoch if result.best_epoch is not None else config.epochs
    save_checkpoint(out_dir / "best.mg2p", bundle_for(best, best_epoch))
    write_manifest(out_dir / "run_manifest.json", "train", config,
                   {"train_lexicon": config.train_lexicon},
                   ["final.mg2p", "best.mg2p", "training_log.tsv"])
    print(f"wrote {out_dir / 'final.mg2p'} and {out_dir / 'best.mg2p'}")
    return 0


def _source_ids(bundle: ModelBundle, word: str, lang: str | None) -> list[int]:
    use_lang = bool(bundle.meta.get("lang_token", True))
    if use_lang:
        if lang is None:
            raise UserError("this model needs a language code (--lang)")
        token = lang_token(lang)
        if token not in bundle.src_vocab:
            print(f"warning: language {lang!r} unseen in training; using an untrained token",
                  file=sys.stderr)
        tokens = tokenize_graphemes(word, lang, use_lang_token=True)
    else:
        tokens = tokenize_graphemes(word, lang or "und", use_lang_token=False)
    return bundle.src_vocab.encode(tokens)


def cmd_translate(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    width = args.width if args.width is not None else 10

    jobs: list[tuple[str, str | None]] = []
    if args.word is not None:
        jobs.append((args.word, args.lang))
    elif args.input is not None:
        with open(args.input, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                if "\t" in line:
                    lang, word = line.split("\t", 1)
                    jobs.append((word, lang))
                else:
                    jobs.append((line, args.lang))
    else:
        raise UserError("give either --word or --input")

    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for word, lang in jobs:
            src_ids = _source_ids(bundle, word, lang)
            nbest = beam_search(src_ids, bundle.params, bundle.config, bundle.tgt_vocab,
                                width=width, max_len=args.max_len)
            write_nbest(out_fh, word, nbest)
    finally:
        if args.out:
            out_fh.close()
    return 0


def cmd_evaluate(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    config = _resolve_config(args)
    width = args.width if args.width is not None else (config.beam_width or 100)
    entries, _ = _read_lexicon_file(config.test_lexicon)
    entries = _filter_languages(entries, config)
    if args.unseen_only:
        trained = set(bundle.meta.get("languages", []))
        entries = [e for e in entries if e.lang not in trained]
        if not entries:
            raise UserError("no unseen-language entries in the test corpus")

    use_lang = bool(bundle.meta.get("lang_token", True))
    done = 0

    def decode_fn(entry):
        nonlocal done
        src_ids = bundle.src_vocab.encode(entry.source_tokens(use_lang))
        nbest = beam_search(src_ids, bundle.params, bundle.config, bundle.tgt_vocab, width=width)
        done += 1
        if done % 200 == 0:
            print(f"decoded {done} words", file=sys.stderr)
        return nbest

    report = metrics.evaluate(entries, decode_fn, width=width)

    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.tsv", "w", encoding="utf-8") as fh:
            metrics.write_report(fh, report)
        with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
            json.dump(metrics.report_as_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_manifest(out_dir / "run_manifest.json", "evaluate", config,
                       {"test_lexicon": config.test_lexicon, "checkpoint": args.checkpoint},
                       ["report.tsv", "report.json"])
    metrics.write_report(sys.stdout, report)
    return 0


def cmd_analyze(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        if args.mode == "phonemes":
            if not args.query:
                raise UserError("phonemes mode needs --query")
            for symbol in _comma_list(args.query):
                result = analysis.nearest_phonemes(symbol, args.k, bundle)
                line = ", ".join(f"{t} ({s:.3f})" for t, s in result.neighbors)
                out_fh.write(f"{symbol}\t{line}\n")
        elif args.mode == "languages":
            if not args.query:
                raise UserError("languages mode needs --query")
            for code in _comma_list(args.query):
                result = analysis.nearest_languages(code, args.k, bundle)
                line = ", ".join(f"{t} ({s:.3f})" for t, s in result.neighbors)
                out_fh.write(f"{code}\t{line}\n")
        elif args.mode == "crosstoken":
            if not args.word or not args.langs:
                raise UserError("crosstoken mode needs --word and --langs")
            table = analysis.translate_as(args.word, _comma_list(args.langs), bundle,
                                          width=args.width if args.width is not None else 10)
            for lang, phones in table.items():
                out_fh.write(f"{lang}\t{' '.join(phones)}\n")
        else:  # pragma: no cover - argparse restricts choices
            raise UserError(f"unknown mode {args.mode!r}")
    except KeyError as exc:
        raise UserError(str(exc)) from None
    finally:
        if args.out:
            out_fh.close()
    return 0


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polyg2p", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare",
                       help="split a lexicon, build vocabularies, write stats")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model")
    _add_config_flags(p)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="decode words to phonemes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--word")
    p.add_argument("--input", help="file of words (or lang<TAB>word lines)")
    p.add_argument("--lang")
    p.add_argument("--width", type=int, default=None, help="beam width (default 10)")
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="score a test lexicon")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--width", type=int, default=None, help="beam width (default 100)")
    p.add_argument("--unseen-only", action="store_true",
                   help="score only languages absent from training")
    p.add_argument("--out", help="directory for report files")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="embedding and cross-token reports")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("phonemes", "languages", "crosstoken"), required=True)
    p.add_argument("--query", help="comma-separated phonemes or language codes")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--word")
    p.add_argument("--langs", help="comma-separated language codes")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UserError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
