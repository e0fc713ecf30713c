"""Command-line front end: train, tag, eval, and lexmatch subcommands.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 diverged or
failed trial.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import LexiconSpec, RunConfig, load_config
from .data import Sentence, read_conll, write_conll
from .errors import ConfigError, DataError, FormatError, TrainingDiverged
from .lexicon import load_lexicon, match_sentence, encode_lexicon_features
from .model import TaggerModel
from .scoring import evaluate_f1
from .tags import bioes_to_spans, convert_to_bioes, detect_dialect
from .train import load_converted_corpus, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_FAILED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_lexicon_flag(values) -> list[tuple[str, str]]:
    pairs = []
    for v in values or []:
        if "=" not in v:
            raise ConfigError(f"--lexicon expects NAME=PATH, got {v!r}")
        name, path = v.split("=", 1)
        pairs.append((name, path))
    return pairs


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nseqtag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a tagger")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--train", dest="train_path", help="training corpus (CoNLL columns)")
    p.add_argument("--dev", dest="dev_path", help="development corpus")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--embeddings", dest="embeddings_path")
    p.add_argument("--lexicon", action="append", metavar="NAME=PATH")
    p.add_argument("--mode", choices=["exact", "partial", "collobert"],
                   help="matching mode for lexicons given via --lexicon")
    p.add_argument("--encoding", choices=["bioes", "yn"],
                   help="encoding for lexicons given via --lexicon")

    p = sub.add_parser("tag", help="tag a corpus with a trained model")
    p.add_argument("model", help="model/checkpoint directory")
    p.add_argument("input", help="corpus to tag")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.add_argument("--constrained", action="store_true",
                   help="restrict Viterbi to structurally valid sequences")
    p.add_argument("--lexicon", action="append", metavar="NAME=PATH",
                   help="override a lexicon path stored in the checkpoint")

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("gold")
    p.add_argument("predicted")

    p = sub.add_parser("lexmatch", help="annotate lexicon matches, no model needed")
    p.add_argument("input", help="corpus to annotate")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.add_argument("--lexicon", action="append", metavar="NAME=PATH", required=True)
    p.add_argument("--mode", choices=["exact", "partial", "collobert"], default="partial")
    p.add_argument("--encoding", choices=["bioes", "yn"], default="bioes")
    return parser


def cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    for name in ("train_path", "dev_path", "out_dir", "seed", "dropout",
                 "learning_rate", "epochs", "batch_size", "embeddings_path"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    for name, path in _parse_lexicon_flag(args.lexicon):
        cfg.lexicons.append(LexiconSpec(name=name, path=path,
                                        mode=args.mode or "partial",
                                        encoding=args.encoding or "bioes"))
    cfg.validate()
    print("effective config: " + json.dumps(cfg.to_dict(), sort_keys=True))
    result = train(cfg)
    for rec in result.log.records:
        dev = f"  dev_f1={rec['dev_f1']:.2f}" if "dev_f1" in rec else ""
        print(f"epoch {rec['epoch']:3d}  loss={rec['train_loss']:.4f}"
              f"  train_tail_f1={rec['train_tail_f1']:.2f}{dev}")
    print(f"status: {result.status}  (model in {result.out_dir})")
    return EXIT_OK if result.status == "ok" else EXIT_FAILED


def cmd_tag(args) -> int:
    overrides = dict(_parse_lexicon_flag(args.lexicon))
    model = TaggerModel.load(args.model, lexicon_paths=overrides or None)
    corpus = read_conll(args.input)
    predicted = [_tag_one(model, sent.tokens, args.constrained) for sent in corpus]
    _append_column(args.input, args.output, predicted)
    return EXIT_OK


def _tag_one(model: TaggerModel, tokens, constrained: bool) -> list[str]:
    """Predicted BIOES tags aligned with the input tokens.

    Under digit splitting the model sees split pieces; predicted spans are
    projected back onto the original tokens before re-encoding.
    """
    if not model.cfg.digit_split:
        return model.tag_tokens(tokens, constrained=constrained)
    from .data import preprocess_tokens, split_digit_runs
    from .tags import spans_to_bioes
    owner = []
    for i, tok in enumerate(tokens):
        owner.extend([i] * len(split_digit_runs(tok)))
    split_sent = preprocess_tokens(Sentence(tokens), digit_split=True)
    tags = model.tag_tokens(split_sent.tokens, constrained=constrained)
    spans = {}
    for s, e, cat in bioes_to_spans(tags):
        key = (owner[s], owner[e])
        spans.setdefault(key, cat)
    merged = []
    covered = set()
    for (s, e), cat in sorted(spans.items()):
        if any(i in covered for i in range(s, e + 1)):
            continue
        covered.update(range(s, e + 1))
        merged.append((s, e, cat))
    return spans_to_bioes(merged, len(tokens))


def _append_column(input_path, output_path, predicted) -> None:
    _append_columns(input_path, output_path, [[col] for col in predicted])


def _append_columns(input_path, output_path, per_sentence_columns) -> None:
    """Copy the input file, appending extra columns to each token line.

    Preserves the original columns, blank lines, and -DOCSTART- lines
    (which get "O" fillers).
    """
    out = open(output_path, "w", encoding="utf-8") if output_path else sys.stdout
    try:
        sent_i = 0
        tok_i = 0
        with open(input_path, encoding="utf-8") as fh:
            for line in fh:
                stripped = line.rstrip("\n")
                if not stripped.strip():
                    if tok_i:
                        sent_i += 1
                        tok_i = 0
                    out.write(stripped + "\n")
                    continue
                n_cols = (len(per_sentence_columns[sent_i])
                          if sent_i < len(per_sentence_columns) else 1)
                if stripped.split()[0] == "-DOCSTART-":
                    if tok_i:
                        sent_i += 1
                        tok_i = 0
                    out.write(stripped + " O" * n_cols + "\n")
                else:
                    extra = [col[tok_i] for col in per_sentence_columns[sent_i]]
                    out.write(stripped + " " + " ".join(extra) + "\n")
                    tok_i += 1
    finally:
        if output_path:
            out.close()


def cmd_eval(args) -> int:
    gold = read_conll(args.gold)
    pred = read_conll(args.predicted)
    if len(gold) != len(pred):
        raise DataError(f"{args.gold} has {len(gold)} sentences, "
                        f"{args.predicted} has {len(pred)}")
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise DataError(f"sentence {i + 1}: length {len(g)} vs {len(p)}")
    dialect = detect_dialect(gold.tag_sentences())
    gold_spans = [bioes_to_spans(convert_to_bioes(s.tags, dialect)) for s in gold]
    pred_spans = [bioes_to_spans(s.tags) for s in pred]
    print(evaluate_f1(gold_spans, pred_spans).format())
    return EXIT_OK


def cmd_lexmatch(args) -> int:
    lexicons = [(name, load_lexicon(path, name=name))
                for name, path in _parse_lexicon_flag(args.lexicon)]
    corpus = read_conll(args.input)
    columns = []
    for sent in corpus:
        cols = []
        for _, lex in lexicons:
            marks = match_sentence(lex, sent.tokens, args.mode)
            if args.encoding == "bioes":
                for cat in sorted(marks):
                    cols.append(marks[cat])
            else:
                enc = encode_lexicon_features(marks, "yn")
                for j, _cat in enumerate(sorted(marks)):
                    cols.append([str(int(v)) for v in enc[:, j]])
        columns.append(cols)
    _append_columns(args.input, args.output, columns)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"train": cmd_train, "tag": cmd_tag, "eval": cmd_eval,
                "lexmatch": cmd_lexmatch}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
