"""Per-token input features: lower-cased word embedding lookup,
capitalization class, char-CNN output, and lexicon match vectors,
concatenated in that fixed order.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ConfigError, DataError
from . import charcnn
from .charcnn import encode_characters, char_cnn_forward

UNKNOWN_WORD = "<UNK>"

CAPS_CLASSES = ("allCaps", "upperInitial", "lowercase", "mixedCaps", "noinfo")
CAPS_DIM = len(CAPS_CLASSES)
_CAPS_ID = {c: i for i, c in enumerate(CAPS_CLASSES)}

_DIGIT_RUN = re.compile(r"[0-9]+")


def normalize_digits(token: str) -> str:
    """Replace every maximal digit run with a single '0'. Idempotent."""
    return _DIGIT_RUN.sub("0", token)


def normalize_word(token: str) -> str:
    """Lookup key for the word table: lower-cased, digit-normalized."""
    return normalize_digits(token.lower())


def caps_feature(raw_token: str) -> str:
    """Five-way capitalization class of the raw surface form.

    Computed before any normalization, since case is erased in the
    embedding lookup key.
    """
    if not raw_token:
        raise ValueError("cannot classify an empty token")
    letters = [c for c in raw_token if c.isalpha()]
    if not letters:
        return "noinfo"
    if all(c.isupper() for c in letters):
        return "allCaps"
    if all(c.islower() for c in letters):
        return "lowercase"
    if raw_token[0].isupper() and all(c.islower() for c in letters[1:]):
        return "upperInitial"
    return "mixedCaps"


def caps_id(raw_token: str) -> int:
    return _CAPS_ID[caps_feature(raw_token)]


def caps_onehot(cid: int) -> np.ndarray:
    v = np.zeros(CAPS_DIM)
    v[cid] = 1.0
    return v


class WordVocab:
    """Normalized word form -> id, with a reserved UNKNOWN id 0."""

    def __init__(self, words):
        self.unk_id = 0
        self._ids: dict[str, int] = {}
        for w in words:
            if w not in self._ids:
                self._ids[w] = 1 + len(self._ids)

    def __len__(self) -> int:
        return 1 + len(self._ids)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def id_of(self, word: str) -> int:
        return self._ids.get(word, self.unk_id)

    def words(self) -> list[str]:
        return list(self._ids.keys())


def word_id(raw_token: str, vocab: WordVocab) -> int:
    """Id of the lower-cased, digit-normalized token, or UNKNOWN."""
    return vocab.id_of(normalize_word(raw_token))


def read_embeddings(path) -> tuple[list[str], np.ndarray]:
    """Read a text embedding file: one token and its float vector per line.

    A first line of exactly two integers is treated as a "V D" header and
    skipped. Returns (tokens, matrix) in file order.
    """
    tokens: list[str] = []
    vectors: list[np.ndarray] = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    start = 0
    if lines:
        head = lines[0].split()
        if len(head) == 2:
            try:
                int(head[0]), int(head[1])
                start = 1
            except ValueError:
                pass
    for ln, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split(" ")
        if len(parts) < 2:
            raise DataError(f"{path}:{ln}: expected token and vector")
        try:
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise DataError(f"{path}:{ln}: bad float in embedding row") from exc
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise DataError(f"{path}:{ln}: vector has {len(vec)} dims, expected {dim}")
        tokens.append(parts[0])
        vectors.append(vec)
    if not tokens:
        return [], np.zeros((0, 0))
    return tokens, np.vstack(vectors)


class FeaturizedSentence:
    """Feature ids for one sentence, computed once and reused across epochs."""

    __slots__ = ("tokens", "word_ids", "caps_ids", "char_ids", "type_ids", "lex", "gold")

    def __init__(self, tokens, word_ids, caps_ids, char_ids, type_ids, lex, gold=None):
        self.tokens = tokens
        self.word_ids = word_ids
        self.caps_ids = caps_ids
        self.char_ids = char_ids
        self.type_ids = type_ids
        self.lex = lex
        self.gold = gold

    def __len__(self) -> int:
        return len(self.tokens)


class Featurizer:
    """Turns raw token sequences into the id bundles the network consumes.

    Owns the frozen vocabularies and lexicons; pure after construction.
    """

    def __init__(self, word_vocab: WordVocab, char_vocab: charcnn.CharVocab, cfg, lexicons=()):
        self.word_vocab = word_vocab
        self.char_vocab = char_vocab
        self.cfg = cfg
        self.lexicons = list(lexicons)

    def lex_dim(self) -> int:
        return sum(lx.feature_dim() for lx in self.lexicons)

    def input_dim(self) -> int:
        dim = self.cfg.word_dim
        if self.cfg.use_caps:
            dim += CAPS_DIM
        if self.cfg.use_cnn:
            dim += self.cfg.cnn_filters
        return dim + self.lex_dim()

    def featurize(self, tokens, gold_ids=None) -> FeaturizedSentence:
        if not tokens:
            raise ValueError("cannot featurize an empty sentence")
        wids = np.array([word_id(t, self.word_vocab) for t in tokens], dtype=np.intp)
        cids = np.array([caps_id(t) for t in tokens], dtype=np.intp)
        char_ids = []
        type_ids = [] if self.cfg.use_char_type else None
        if self.cfg.use_cnn:
            for t in tokens:
                ci, ti = encode_characters(t, self.char_vocab, self.cfg.conv_width,
                                           self.cfg.use_char_type)
                char_ids.append(ci)
                if type_ids is not None:
                    type_ids.append(ti)
        lex = self._lex_features(tokens)
        return FeaturizedSentence(list(tokens), wids, cids, char_ids, type_ids, lex, gold_ids)

    def _lex_features(self, tokens) -> np.ndarray:
        T = len(tokens)
        if not self.lexicons:
            return np.zeros((T, 0))
        blocks = [lx.featurize(tokens) for lx in self.lexicons]
        return np.concatenate(blocks, axis=1)


def assemble_word_vector(sent: FeaturizedSentence, t: int, params, cfg,
                         cnn_params=None) -> np.ndarray:
    """Concatenated input vector for token t:
    [word_emb | caps one-hot | char CNN | lexicon features].

    Disabled features contribute nothing; the caps block is a frozen
    identity lookup (no trainable weights).
    """
    parts = [params["word_table"].value[sent.word_ids[t]]]
    if cfg.use_caps:
        parts.append(caps_onehot(int(sent.caps_ids[t])))
    if cfg.use_cnn:
        if cnn_params is None:
            raise ConfigError("char CNN enabled but no CNN parameters supplied")
        ti = sent.type_ids[t] if sent.type_ids is not None else None
        out, _ = char_cnn_forward(sent.char_ids[t], ti, cnn_params)
        parts.append(out)
    if sent.lex.shape[1]:
        parts.append(sent.lex[t])
    return np.concatenate(parts)
