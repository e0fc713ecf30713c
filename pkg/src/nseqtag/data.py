"""CoNLL column-format corpora: reading/writing, digit preprocessing,
equal-length mini-batches, and vocabulary construction.
"""

from __future__ import annotations

import re

from .errors import ConfigError, DataError
from . import tags as tagmod
from .charcnn import CharVocab
from .features import WordVocab, normalize_digits, normalize_word

DOCSTART = "-DOCSTART-"

_DIGIT_SPLIT = re.compile(r"[0-9]+|[^0-9]+")


class Sentence:
    __slots__ = ("tokens", "tags")

    def __init__(self, tokens, tags=None):
        if not tokens:
            raise DataError("empty sentence")
        if tags is not None and len(tags) != len(tokens):
            raise DataError("token/tag length mismatch")
        self.tokens = list(tokens)
        self.tags = list(tags) if tags is not None else None

    def __len__(self):
        return len(self.tokens)


class Corpus:
    """Sentences plus their provenance; document boundaries are recorded
    as indices into `sentences` but never used as training sentences."""

    def __init__(self, sentences, path=None, doc_starts=None, labeled=True):
        self.sentences = sentences
        self.path = path
        self.doc_starts = doc_starts or []
        self.labeled = labeled

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def tag_sentences(self):
        return [s.tags for s in self.sentences]


def read_conll(path, labeled=None) -> Corpus:
    """Read whitespace-separated columns; blank line ends a sentence.

    Token is the first column; the tag, when present, is the last. Column
    counts must agree within a sentence. -DOCSTART- lines mark document
    boundaries and are excluded from the sentence list.
    """
    sentences = []
    doc_starts = []
    cur_tokens: list[str] = []
    cur_tags: list[str] = []
    ncols = None
    saw_tags = False

    def flush():
        nonlocal ncols
        if cur_tokens:
            sentences.append(Sentence(list(cur_tokens),
                                      list(cur_tags) if cur_tags else None))
            cur_tokens.clear()
            cur_tags.clear()
        ncols = None

    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            cols = line.split()
            if cols[0] == DOCSTART:
                flush()
                doc_starts.append(len(sentences))
                continue
            if ncols is None:
                ncols = len(cols)
            elif len(cols) != ncols:
                raise DataError(
                    f"{path}:{ln}: inconsistent column count {len(cols)} (expected {ncols})"
                )
            has_tag = len(cols) >= 2 if labeled is None else labeled
            if has_tag and len(cols) < 2:
                raise DataError(f"{path}:{ln}: expected a tag column")
            cur_tokens.append(cols[0])
            if has_tag:
                cur_tags.append(cols[-1])
                saw_tags = True
        flush()
    return Corpus(sentences, path=str(path), doc_starts=doc_starts, labeled=saw_tags)


def write_conll(path, sentences, tag_columns=None) -> None:
    """Write token-per-line sentences, blank-line separated. Each entry of
    `tag_columns` is a per-sentence list of extra column lists."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, sent in enumerate(sentences):
            tokens = sent.tokens if isinstance(sent, Sentence) else sent
            rows = [[tok] for tok in tokens]
            if isinstance(sent, Sentence) and sent.tags is not None:
                for t, tag in enumerate(sent.tags):
                    rows[t].append(tag)
            if tag_columns is not None:
                for col in tag_columns[i]:
                    for t, v in enumerate(col):
                        rows[t].append(v)
            for row in rows:
                fh.write(" ".join(row) + "\n")
            fh.write("\n")


# ---------------------------------------------------------------------------
# Preprocessing


def split_digit_runs(token: str) -> list[str]:
    """Split a token at boundaries between digit runs and everything else:
    "25km" -> ["25", "km"]. Concatenation of the pieces is the original."""
    return _DIGIT_SPLIT.findall(token)


def preprocess_tokens(sentence: Sentence, digit_split: bool = False) -> Sentence:
    """Replace every maximal digit run with "0"; with digit_split, first
    split each token around digit runs, re-aligning BIOES tags so pieces
    inherit their token's span membership.
    """
    if not digit_split:
        return Sentence([normalize_digits(t) for t in sentence.tokens], sentence.tags)
    spans = tagmod.bioes_to_spans(sentence.tags) if sentence.tags is not None else None
    new_tokens: list[str] = []
    first_piece = []  # index of each original token's first piece
    for tok in sentence.tokens:
        first_piece.append(len(new_tokens))
        new_tokens.extend(normalize_digits(p) for p in split_digit_runs(tok))
    first_piece.append(len(new_tokens))
    if spans is None:
        return Sentence(new_tokens, None)
    new_spans = [(first_piece[s], first_piece[e + 1] - 1, cat) for s, e, cat in spans]
    return Sentence(new_tokens, tagmod.spans_to_bioes(new_spans, len(new_tokens)))


def preprocess_corpus(corpus: Corpus, digit_split: bool = False) -> Corpus:
    return Corpus([preprocess_tokens(s, digit_split) for s in corpus.sentences],
                  path=corpus.path, doc_starts=corpus.doc_starts, labeled=corpus.labeled)


# ---------------------------------------------------------------------------
# Mini-batches


def make_batches(sentences, batch_size: int, rng) -> list[list]:
    """Group sentences by exact token count, chunk groups into batches of
    at most batch_size, and shuffle the batch order with `rng`. Every
    sentence lands in exactly one batch."""
    if batch_size < 1:
        raise ConfigError(f"batch size must be >= 1, got {batch_size}")
    by_len: dict[int, list] = {}
    for s in sentences:
        by_len.setdefault(len(s), []).append(s)
    batches = []
    for length in sorted(by_len):
        group = by_len[length]
        for i in range(0, len(group), batch_size):
            batches.append(group[i:i + batch_size])
    order = list(range(len(batches)))
    rng.shuffle(order)
    return [batches[i] for i in order]


# ---------------------------------------------------------------------------
# Vocabularies


def build_vocabs(corpus: Corpus, extra_words=()):
    """(WordVocab, CharVocab, category list) from a labeled corpus.

    Word keys are normalized (lower-case, digit runs collapsed) and
    sorted; `extra_words` (e.g. pretrained-embedding tokens) are unioned
    in. The char vocabulary keeps raw surface characters, plus "0" since
    normalization can introduce it.
    """
    if len(corpus) == 0:
        raise ConfigError("cannot build vocabularies from an empty corpus")
    words = set()
    chars = {"0"}
    categories = set()
    for sent in corpus:
        for tok in sent.tokens:
            words.add(normalize_word(tok))
            chars.update(tok)
        if sent.tags is not None:
            for tag in sent.tags:
                prefix, cat = tagmod.split_tag(tag)
                if cat is not None:
                    categories.add(cat)
    for w in extra_words:
        words.add(normalize_word(w))
    return WordVocab(sorted(words)), CharVocab(sorted(chars)), sorted(categories)
