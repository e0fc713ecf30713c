"""The tagger network: per-token feature vectors -> stacked bidirectional
LSTM -> per-direction linear + log-softmax heads, summed into tag scores;
trained by the sentence-level log-likelihood and decoded with Viterbi.
"""

from __future__ import annotations

import json
import pathlib

import numpy as np

from . import crf
from .charcnn import CharCnnParams, CharVocab
from .config import LexiconSpec, RunConfig
from .errors import ConfigError, TrainingDiverged
from .features import CAPS_DIM, Featurizer, FeaturizedSentence, WordVocab, caps_onehot
from .lexicon import LexiconFeature, load_lexicon
from .nncore import (LstmCellParams, ParameterSet, RngState, dropout_mask,
                     log_softmax, log_softmax_backward, lookup_backward,
                     lstm_step, lstm_step_backward)
from .serialize import load_parameters, save_parameters
from .tags import TagSet
from . import charcnn as charcnn_mod

DIRECTIONS = ("f", "b")


def _lstm_input_dims(cfg: RunConfig, input_dim: int) -> list[int]:
    return [input_dim] + [cfg.lstm_size] * (cfg.lstm_layers - 1)


def init_parameters(cfg: RunConfig, n_words: int, n_chars: int, n_tags: int,
                    lex_dim: int, rng: RngState, pretrained=None) -> ParameterSet:
    """Build and initialize every trainable tensor.

    Lookup tables draw from N(0,1) except the char table (U[-0.5, 0.5]);
    weight matrices draw from U(+-1/sqrt(fan_in)); biases and the
    transition matrix start at zero. `pretrained` is an optional
    (row_ids, matrix) pair copied into the word table.
    """
    params = ParameterSet()
    H = cfg.lstm_size
    input_dim = cfg.word_dim + (CAPS_DIM if cfg.use_caps else 0) \
        + (cfg.cnn_filters if cfg.use_cnn else 0) + lex_dim

    word = params.add("word_table", rng.normal((n_words, cfg.word_dim)))
    if pretrained is not None:
        ids, matrix = pretrained
        if matrix.shape[1] != cfg.word_dim:
            raise ConfigError(
                f"pretrained embeddings are {matrix.shape[1]}-d, config says {cfg.word_dim}")
        word.value[np.asarray(ids, dtype=np.intp)] = matrix

    if cfg.use_cnn:
        params.add("char_table", rng.uniform(-0.5, 0.5, (n_chars, cfg.char_dim)))
        depth = cfg.char_dim
        if cfg.use_char_type:
            params.add("char_type_table", rng.normal((4, cfg.char_type_dim)))
            depth += cfg.char_type_dim
        fan = cfg.conv_width * depth
        params.add("cnn_filters",
                   rng.uniform(-1 / np.sqrt(fan), 1 / np.sqrt(fan), (cfg.cnn_filters, fan)))
        params.add("cnn_bias", np.zeros(cfg.cnn_filters))

    for layer, d_in in enumerate(_lstm_input_dims(cfg, input_dim)):
        for d in DIRECTIONS:
            params.add(f"lstm_{d}{layer}_W",
                       rng.uniform(-1 / np.sqrt(d_in), 1 / np.sqrt(d_in), (4 * H, d_in)))
            params.add(f"lstm_{d}{layer}_U",
                       rng.uniform(-1 / np.sqrt(H), 1 / np.sqrt(H), (4 * H, H)))
            params.add(f"lstm_{d}{layer}_b", np.zeros(4 * H))
    for d in DIRECTIONS:
        params.add(f"head_{d}_W",
                   rng.uniform(-1 / np.sqrt(H), 1 / np.sqrt(H), (n_tags, H)))
        params.add(f"head_{d}_b", np.zeros(n_tags))
    params.add("transitions", np.zeros((n_tags + 1, n_tags)))
    return params


def _cell(params: ParameterSet, d: str, layer: int, hidden: int) -> LstmCellParams:
    return LstmCellParams(params[f"lstm_{d}{layer}_W"], params[f"lstm_{d}{layer}_U"],
                          params[f"lstm_{d}{layer}_b"], hidden)


def cnn_params(params: ParameterSet, cfg: RunConfig) -> CharCnnParams:
    return CharCnnParams(
        params["char_table"], params["cnn_filters"], params["cnn_bias"],
        cfg.conv_width,
        params["char_type_table"] if cfg.use_char_type else None)


# ---------------------------------------------------------------------------
# BLSTM + output heads over precomputed feature vectors


def blstm_forward(x: np.ndarray, params: ParameterSet, cfg: RunConfig,
                  mode: str = "eval", rng: RngState | None = None):
    """Tag scores for a (T, D) feature matrix. Returns (scores, cache).

    Initial LSTM states are zero. In train mode an inverted-dropout mask
    hits each layer's output (the copy fed upward; the recurrent path
    stays undropped), independently per direction, layer, and timestep.
    """
    T = x.shape[0]
    if T < 1:
        raise ValueError("need at least one token")
    H = cfg.lstm_size
    train = mode == "train"
    if train and cfg.dropout > 0.0 and rng is None:
        raise ConfigError("train-mode forward needs an RngState for dropout")
    per_dir = {}
    for d in DIRECTIONS:
        order = range(T) if d == "f" else range(T - 1, -1, -1)
        inp = [x[t] for t in range(T)]
        layers = []
        for layer in range(cfg.lstm_layers):
            cell = _cell(params, d, layer, H)
            h = np.zeros(H)
            c = np.zeros(H)
            caches = [None] * T
            raw = [None] * T
            for t in order:
                h, c, caches[t] = lstm_step(cell, inp[t], h, c)
                raw[t] = h
            if train and cfg.dropout > 0.0:
                mask = dropout_mask((T, H), cfg.dropout, rng)
                out = [raw[t] * mask[t] for t in range(T)]
            else:
                mask = None
                out = raw
            layers.append({"caches": caches, "mask": mask, "inputs": inp})
            inp = out
        per_dir[d] = {"layers": layers, "top": inp}

    K = params["head_f_W"].shape[0]
    scores = np.empty((T, K))
    ys = {d: [None] * T for d in DIRECTIONS}
    for t in range(T):
        total = np.zeros(K)
        for d in DIRECTIONS:
            W, b = params[f"head_{d}_W"], params[f"head_{d}_b"]
            y = log_softmax(W.value @ per_dir[d]["top"][t] + b.value)
            ys[d][t] = y
            total += y
        scores[t] = total
    return scores, (x, per_dir, ys)


def network_forward(x: np.ndarray, params: ParameterSet, cfg: RunConfig,
                    mode: str = "eval", rng: RngState | None = None) -> np.ndarray:
    scores, _ = blstm_forward(x, params, cfg, mode, rng)
    return scores


def blstm_backward(dscores: np.ndarray, cache, params: ParameterSet,
                   cfg: RunConfig) -> np.ndarray:
    """Backward through heads and both LSTM stacks; accumulates parameter
    gradients and returns gradients w.r.t. the input feature matrix."""
    x, per_dir, ys = cache
    T = x.shape[0]
    H = cfg.lstm_size
    dx = np.zeros_like(x)
    for d in DIRECTIONS:
        W = params[f"head_{d}_W"]
        b = params[f"head_{d}_b"]
        top = per_dir[d]["top"]
        dtop = [None] * T
        for t in range(T):
            dz = log_softmax_backward(ys[d][t], dscores[t])
            W.grad += np.outer(dz, top[t])
            b.grad += dz
            dtop[t] = W.value.T @ dz
        order = range(T) if d == "f" else range(T - 1, -1, -1)
        rev = list(order)[::-1]
        dout = dtop  # grad w.r.t. the layer's (masked) output
        for layer in range(cfg.lstm_layers - 1, -1, -1):
            info = per_dir[d]["layers"][layer]
            cell = _cell(params, d, layer, H)
            mask = info["mask"]
            if mask is not None:
                draw = [dout[t] * mask[t] for t in range(T)]
            else:
                draw = list(dout)
            dinp = [None] * T
            dh_carry = np.zeros(H)
            dc = np.zeros(H)
            for t in rev:
                dh = draw[t] + dh_carry
                dinp[t], dh_carry, dc = lstm_step_backward(cell, info["caches"][t], dh, dc)
            dout = dinp
        for t in range(T):
            dx[t] += dout[t]
    return dx


# ---------------------------------------------------------------------------
# Full pass over a featurized sentence


def sentence_forward(sent: FeaturizedSentence, params: ParameterSet, cfg: RunConfig,
                     mode: str = "eval", rng: RngState | None = None):
    """Assemble per-token vectors (embedding lookups + caps + char CNN +
    lexicon blocks) and run the network. Returns (scores, cache)."""
    T = len(sent)
    cnn = cnn_params(params, cfg) if cfg.use_cnn else None
    cnn_caches = [None] * T
    rows = []
    for t in range(T):
        parts = [params["word_table"].value[sent.word_ids[t]]]
        if cfg.use_caps:
            parts.append(caps_onehot(int(sent.caps_ids[t])))
        if cnn is not None:
            ti = sent.type_ids[t] if sent.type_ids is not None else None
            out, cnn_caches[t] = charcnn_mod.char_cnn_forward(sent.char_ids[t], ti, cnn)
            parts.append(out)
        if sent.lex.shape[1]:
            parts.append(sent.lex[t])
        rows.append(np.concatenate(parts))
    x = np.vstack(rows)
    scores, net_cache = blstm_forward(x, params, cfg, mode, rng)
    return scores, (sent, cnn, cnn_caches, net_cache)


def sentence_backward(dscores: np.ndarray, cache, params: ParameterSet,
                      cfg: RunConfig) -> None:
    """Backward from tag-score gradients into every trainable table."""
    sent, cnn, cnn_caches, net_cache = cache
    dx = blstm_backward(dscores, net_cache, params, cfg)
    lo = 0
    lookup_backward(params["word_table"].grad, sent.word_ids, dx[:, lo:lo + cfg.word_dim])
    lo += cfg.word_dim
    if cfg.use_caps:
        lo += CAPS_DIM  # frozen one-hot block
    if cnn is not None:
        for t in range(len(sent)):
            charcnn_mod.char_cnn_backward(dx[t, lo:lo + cfg.cnn_filters], cnn_caches[t], cnn)
        lo += cfg.cnn_filters
    # lexicon features are frozen indicators: nothing to propagate


def loss_and_gradients(batch, params: ParameterSet, cfg: RunConfig,
                       rng: RngState | None = None) -> float:
    """Mean negative log-likelihood over an equal-length batch, with
    gradients (averaged the same way) left in the ParameterSet."""
    if not batch:
        raise ValueError("empty batch")
    T = len(batch[0])
    if any(len(s) != T for s in batch):
        raise ValueError("mini-batch sentences must share one length")
    params.zero_grads()
    A = params["transitions"]
    total = 0.0
    for sent in batch:
        if sent.gold is None:
            raise ValueError("loss needs gold tags")
        scores, cache = sentence_forward(sent, params, cfg, "train", rng)
        logp, grad_f, grad_a = crf.log_likelihood(scores, A.value, sent.gold)
        total += -logp
        A.grad += grad_a
        sentence_backward(grad_f, cache, params, cfg)
    if not np.isfinite(total):
        raise TrainingDiverged(f"non-finite batch loss {total!r}")
    params.scale_grads(1.0 / len(batch))
    return total / len(batch)


# ---------------------------------------------------------------------------
# Bundled model: parameters + vocabularies + feature setup


class TaggerModel:
    """Everything needed to tag text: config, frozen vocabularies and
    lexicons, the tagset, and trained parameters."""

    def __init__(self, cfg: RunConfig, featurizer: Featurizer, tagset: TagSet,
                 params: ParameterSet):
        self.cfg = cfg
        self.featurizer = featurizer
        self.tagset = tagset
        self.params = params
        self._masks = tagset.constraint_masks()

    @classmethod
    def create(cls, cfg: RunConfig, word_vocab: WordVocab, char_vocab: CharVocab,
               categories, lexicons, rng: RngState, pretrained=None) -> "TaggerModel":
        tagset = TagSet(categories)
        featurizer = Featurizer(word_vocab, char_vocab, cfg, lexicons)
        params = init_parameters(cfg, len(word_vocab), len(char_vocab), len(tagset),
                                 featurizer.lex_dim(), rng, pretrained)
        return cls(cfg, featurizer, tagset, params)

    def featurize(self, tokens, gold_tags=None) -> FeaturizedSentence:
        gold = self.tagset.encode(gold_tags) if gold_tags is not None else None
        return self.featurizer.featurize(tokens, gold)

    def scores(self, sent: FeaturizedSentence) -> np.ndarray:
        return network_forward_sentence(sent, self.params, self.cfg)

    def tag_ids(self, sent: FeaturizedSentence, constrained: bool = False) -> np.ndarray:
        f = self.scores(sent)
        A = self.params["transitions"].value
        return crf.viterbi(f, A, self._masks if constrained else None)

    def tag_tokens(self, tokens, constrained: bool = False) -> list[str]:
        sent = self.featurize(tokens)
        return self.tagset.decode(self.tag_ids(sent, constrained))

    # -- persistence --------------------------------------------------------

    def save(self, directory) -> None:
        d = pathlib.Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_parameters(self.params, d / "params.nstp")
        meta = {
            "config": self.cfg.to_dict(),
            "word_vocab": self.featurizer.word_vocab.words(),
            "char_vocab": self.featurizer.char_vocab.chars(),
            "categories": self.tagset.categories,
            "lexicons": [
                {"name": fb.lexicon.name, "mode": fb.mode, "encoding": fb.encoding,
                 "categories": fb.lexicon.categories()}
                for fb in self.featurizer.lexicons
            ],
        }
        with open(d / "meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, directory, lexicon_paths: dict[str, str] | None = None) -> "TaggerModel":
        d = pathlib.Path(directory)
        with open(d / "meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        cfg = RunConfig.from_dict(meta["config"]).validate()
        word_vocab = WordVocab(meta["word_vocab"])
        char_vocab = CharVocab(meta["char_vocab"])
        tagset = TagSet(meta["categories"])
        blocks = []
        for spec, stored in zip(cfg.lexicons, meta["lexicons"]):
            path = (lexicon_paths or {}).get(spec.name, spec.path)
            lex = load_lexicon(path, name=spec.name)
            if lex.categories() != stored["categories"]:
                raise ConfigError(
                    f"lexicon {spec.name!r} at {path} has categories {lex.categories()}, "
                    f"checkpoint expects {stored['categories']}")
            blocks.append(LexiconFeature(lex, spec.mode, spec.encoding))
        if len(blocks) != len(meta["lexicons"]):
            raise ConfigError("lexicon specs in config and checkpoint disagree")
        featurizer = Featurizer(word_vocab, char_vocab, cfg, blocks)
        params = load_parameters(d / "params.nstp")
        expected = init_parameters(cfg, len(word_vocab), len(char_vocab), len(tagset),
                                   featurizer.lex_dim(), RngState(0))
        if params.names() != expected.names():
            raise ConfigError("checkpoint parameters do not match the stored config")
        for p, q in zip(params, expected):
            if p.shape != q.shape:
                raise ConfigError(
                    f"parameter {p.name!r} has shape {p.shape}, expected {q.shape}")
        return cls(cfg, featurizer, tagset, params)


def network_forward_sentence(sent: FeaturizedSentence, params: ParameterSet,
                             cfg: RunConfig) -> np.ndarray:
    """Eval-mode tag scores for a featurized sentence."""
    scores, _ = sentence_forward(sent, params, cfg, "eval")
    return scores
