"""Character-level word features: convolution over per-character vectors
followed by max-over-time, yielding a fixed-length vector per word.
"""

from __future__ import annotations

import string

import numpy as np

from .nncore import Param, lookup_backward

PADDING = "<PAD>"
UNKNOWN = "<UNK>"

CHAR_TYPES = ("upper", "lower", "punctuation", "other")
_TYPE_ID = {t: i for i, t in enumerate(CHAR_TYPES)}
_ASCII_PUNCT = set(string.punctuation)


def char_type_of(ch: str) -> str:
    """Classify one character as upper / lower / punctuation / other.

    Letters use Unicode case; punctuation is the ASCII set; digits,
    whitespace and everything else fall through to "other".
    """
    if ch.isalpha():
        if ch.isupper():
            return "upper"
        if ch.islower():
            return "lower"
        return "other"
    if ch in _ASCII_PUNCT:
        return "punctuation"
    return "other"


def char_type_id(ch: str) -> int:
    return _TYPE_ID[char_type_of(ch)]


class CharVocab:
    """Character -> id map with reserved PADDING and UNKNOWN entries."""

    def __init__(self, chars):
        self.pad_id = 0
        self.unk_id = 1
        self._ids = {}
        for c in chars:
            if c not in self._ids:
                self._ids[c] = 2 + len(self._ids)

    @classmethod
    def build(cls, tokens) -> "CharVocab":
        """Vocabulary over all characters appearing in `tokens`, sorted."""
        seen = set()
        for tok in tokens:
            seen.update(tok)
        return cls(sorted(seen))

    def __len__(self) -> int:
        return 2 + len(self._ids)

    def __contains__(self, ch: str) -> bool:
        return ch in self._ids

    def id_of(self, ch: str) -> int:
        return self._ids.get(ch, self.unk_id)

    def chars(self) -> list[str]:
        return list(self._ids.keys())


def encode_characters(word: str, vocab: CharVocab, window: int, use_char_type: bool = False):
    """Character ids (and optionally type ids) for `word`, padded with
    floor(window/2) PADDING rows per side so every character is covered by
    a full window.

    Returns (char_ids, type_ids) with type_ids None when disabled.
    """
    if not word:
        raise ValueError("cannot encode an empty word")
    pad = window // 2
    ids = [vocab.pad_id] * pad + [vocab.id_of(c) for c in word] + [vocab.pad_id] * pad
    char_ids = np.asarray(ids, dtype=np.intp)
    if not use_char_type:
        return char_ids, None
    other = _TYPE_ID["other"]
    types = [other] * pad + [char_type_id(c) for c in word] + [other] * pad
    return char_ids, np.asarray(types, dtype=np.intp)


class CharCnnParams:
    """Parameter bundle for the convolution: embedding table(s), a filter
    bank of shape (n_filters, window * depth), and a bias per filter."""

    def __init__(self, char_table: Param, filters: Param, bias: Param,
                 window: int, type_table: Param | None = None):
        if window < 1 or window % 2 == 0:
            raise ValueError(f"convolution width must be odd and >= 1, got {window}")
        depth = char_table.shape[1] + (type_table.shape[1] if type_table is not None else 0)
        if filters.shape[1] != window * depth:
            raise ValueError(
                f"filter width {filters.shape[1]} != window*depth {window * depth}"
            )
        if bias.shape != (filters.shape[0],):
            raise ValueError(f"bias shape {bias.shape} != ({filters.shape[0]},)")
        self.char_table = char_table
        self.type_table = type_table
        self.filters = filters
        self.bias = bias
        self.window = window

    @property
    def n_filters(self) -> int:
        return self.filters.shape[0]


def char_cnn_forward(char_ids: np.ndarray, type_ids, p: CharCnnParams):
    """Convolve every width-w window (stride 1), add bias, max over
    positions. Returns (output[n_filters], cache).

    Ties in the max are resolved toward the earliest window so gradient
    routing is deterministic.
    """
    rows = p.char_table.value[char_ids]
    if p.type_table is not None:
        if type_ids is None:
            raise ValueError("params include a char-type table but no type ids given")
        rows = np.concatenate([rows, p.type_table.value[type_ids]], axis=1)
    n, depth = rows.shape
    w = p.window
    if n < w:
        raise ValueError(f"need at least {w} character rows, got {n}")
    n_win = n - w + 1
    # im2col: each window flattened row-major to match the filter layout
    windows = np.empty((n_win, w * depth))
    for k in range(n_win):
        windows[k] = rows[k:k + w].ravel()
    conv = windows @ p.filters.value.T + p.bias.value  # (n_win, n_filters)
    best = conv.argmax(axis=0)  # first max wins ties
    out = conv[best, np.arange(p.n_filters)]
    return out, (char_ids, type_ids, windows, best)


def char_cnn_backward(dout: np.ndarray, cache, p: CharCnnParams) -> None:
    """Route each filter's gradient through its argmax window only;
    accumulates into filter, bias and embedding-table gradients."""
    char_ids, type_ids, windows, best = cache
    w = p.window
    char_dim = p.char_table.shape[1]
    depth = windows.shape[1] // w
    p.bias.grad += dout
    p.filters.grad += dout[:, None] * windows[best]
    # d rows: per filter, dout_f * filter_f lands on the argmax window
    drows = np.zeros((len(char_ids), depth))
    dwin = dout[:, None] * p.filters.value  # (n_filters, w*depth)
    for f in range(p.n_filters):
        k = best[f]
        drows[k:k + w] += dwin[f].reshape(w, depth)
    lookup_backward(p.char_table.grad, char_ids, drows[:, :char_dim])
    if p.type_table is not None:
        lookup_backward(p.type_table.grad, type_ids, drows[:, char_dim:])
