"""Training driver: shuffled equal-length mini-batch SGD with dropout,
per-epoch checkpoints and scoring, and end-of-run failed-trial detection.
"""

from __future__ import annotations

import json
import pathlib
import time

import numpy as np

from .config import RunConfig
from .data import make_batches, preprocess_corpus, read_conll, build_vocabs
from .errors import ConfigError, DataError, TrainingDiverged
from .features import normalize_word, read_embeddings
from .lexicon import LexiconFeature, load_lexicon
from .model import TaggerModel, loss_and_gradients
from .nncore import RngState, sgd_update
from .scoring import evaluate_f1
from .tags import bioes_to_spans, convert_to_bioes, detect_dialect


class TrainLog:
    """Per-epoch records plus a final run status."""

    def __init__(self):
        self.records: list[dict] = []
        self.status = "ok"

    def add(self, **record) -> None:
        self.records.append(record)

    def final(self, key: str):
        if not self.records or key not in self.records[-1]:
            return None
        return self.records[-1][key]

    def to_dict(self) -> dict:
        return {"status": self.status, "epochs": self.records}

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def detect_failed_trial(log: TrainLog, metric: str, threshold: float) -> bool:
    """True when the trial passes: final value of `metric` >= threshold."""
    if metric not in ("dev_f1", "train_tail_f1"):
        raise ConfigError(f"unknown failure metric {metric!r}")
    value = log.final(metric)
    if value is None:
        raise ConfigError(f"metric {metric!r} is not present in the training log")
    return value >= threshold


def load_converted_corpus(path, cfg: RunConfig, require_labels: bool):
    """Read a corpus, convert tags to BIOES, and apply digit preprocessing."""
    corpus = read_conll(path)
    if require_labels:
        for sent in corpus:
            if sent.tags is None:
                raise DataError(f"{path}: training/evaluation corpus must be labeled")
    if corpus.labeled:
        dialect = cfg.dialect
        if dialect == "auto":
            dialect = detect_dialect(corpus.tag_sentences())
        for sent in corpus:
            if sent.tags is not None:
                sent.tags = convert_to_bioes(sent.tags, dialect)
    return preprocess_corpus(corpus, cfg.digit_split)


def _load_lexicon_blocks(cfg: RunConfig):
    return [LexiconFeature(load_lexicon(spec.path, name=spec.name), spec.mode, spec.encoding)
            for spec in cfg.lexicons]


def _load_pretrained(cfg: RunConfig, word_vocab):
    if not cfg.embeddings_path:
        return None, ()
    tokens, matrix = read_embeddings(cfg.embeddings_path)
    if matrix.size and matrix.shape[1] != cfg.word_dim:
        raise ConfigError(
            f"embeddings are {matrix.shape[1]}-d but word_dim is {cfg.word_dim}")
    if word_vocab is None:
        return (tokens, matrix), tokens
    ids, rows, seen = [], [], set()
    for tok, row in zip(tokens, matrix):
        wid = word_vocab.id_of(normalize_word(tok))
        if wid != word_vocab.unk_id and wid not in seen:
            seen.add(wid)
            ids.append(wid)
            rows.append(row)
    return ((ids, np.vstack(rows)) if ids else None), tokens


def _f1_on(model: TaggerModel, featurized, gold_spans) -> float:
    pred = [bioes_to_spans(model.tagset.decode(model.tag_ids(s))) for s in featurized]
    return evaluate_f1(gold_spans, pred).f1


class TrainResult:
    def __init__(self, model, log, out_dir, status):
        self.model = model
        self.log = log
        self.out_dir = out_dir
        self.status = status  # ok | diverged | failed


def train(cfg: RunConfig) -> TrainResult:
    """Run the full training loop described by `cfg`.

    Writes per-epoch checkpoints, a final model, a best-dev marker, and
    train_log.json under cfg.out_dir.
    """
    cfg.validate()
    if not cfg.train_path:
        raise ConfigError("train_path is required")
    out = pathlib.Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    corpus = load_converted_corpus(cfg.train_path, cfg, require_labels=True)
    if len(corpus) == 0:
        raise DataError(f"{cfg.train_path}: no sentences")
    dev = load_converted_corpus(cfg.dev_path, cfg, require_labels=True) if cfg.dev_path else None

    emb_tokens: tuple = ()
    if cfg.embeddings_path:
        _, emb_tokens = _load_pretrained(cfg, None)
    word_vocab, char_vocab, categories = build_vocabs(corpus, extra_words=emb_tokens)
    if not categories:
        raise DataError(f"{cfg.train_path}: no entity categories in the gold tags")
    pretrained, _ = _load_pretrained(cfg, word_vocab)

    master = RngState(cfg.seed)
    model = TaggerModel.create(cfg, word_vocab, char_vocab, categories,
                               _load_lexicon_blocks(cfg), master.child("init"),
                               pretrained)

    featurized = [model.featurize(s.tokens, s.tags) for s in corpus]
    tail_n = min(cfg.train_tail, len(featurized))
    tail = featurized[-tail_n:]
    tail_gold = [bioes_to_spans(s.tags) for s in corpus.sentences[-tail_n:]]
    dev_feats = dev_gold = None
    if dev is not None:
        dev_feats = [model.featurize(s.tokens, s.tags) for s in dev]
        dev_gold = [bioes_to_spans(s.tags) for s in dev.sentences]

    shuffle_rng = master.child("shuffle")
    dropout_rng = master.child("dropout")
    log = TrainLog()
    best_dev = None
    status = "ok"

    model.save(out / "final")  # epochs=0 leaves the initial parameters
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        try:
            total = 0.0
            for batch in make_batches(featurized, cfg.batch_size, shuffle_rng):
                loss = loss_and_gradients(batch, model.params, cfg, dropout_rng)
                total += loss * len(batch)
                sgd_update(model.params, cfg.learning_rate)
        except TrainingDiverged:
            status = "diverged"
            log.status = "diverged"
            log.write(out / "train_log.json")
            return TrainResult(model, log, out, status)

        record = {
            "epoch": epoch,
            "train_loss": total / len(featurized),
            "train_tail_f1": _f1_on(model, tail, tail_gold),
            "wall_time": round(time.perf_counter() - t0, 3),
        }
        if dev_feats is not None:
            record["dev_f1"] = _f1_on(model, dev_feats, dev_gold)
            if best_dev is None or record["dev_f1"] > best_dev[1]:
                best_dev = (epoch, record["dev_f1"])
        log.add(**record)

        if epoch % cfg.checkpoint_interval == 0 or epoch == cfg.epochs:
            model.save(out / f"epoch_{epoch:03d}")
    model.save(out / "final")

    if best_dev is not None:
        (out / "best.txt").write_text(f"epoch_{best_dev[0]:03d}\n", encoding="utf-8")
    if cfg.failure_metric is not None and cfg.epochs > 0:
        if not detect_failed_trial(log, cfg.failure_metric, cfg.failure_threshold):
            status = "failed"
            log.status = "failed"
    log.write(out / "train_log.json")
    return TrainResult(model, log, out, status)
