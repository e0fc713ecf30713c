"""Category lexicons (gazetteers): entry normalization, n-gram matching
with exact / partial / first-word modes, overlap resolution, and per-token
B/I/E/S/O marks encoded as feature vectors.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ConfigError, DataError

# Match kinds, in descending mark "strength". A span that equals a whole
# entry is exact; otherwise it may align with an entry's start (prefix) or
# end (suffix). A partial that is both is marked as a prefix.
EXACT, PREFIX, SUFFIX = "exact", "prefix", "suffix"

BIOES_ORDER = "BIOES"
_BIOES_COL = {m: i for i, m in enumerate(BIOES_ORDER)}

# Categories granted 1-token partial matches (the minimum-length rule
# applies everywhere else). Compared case-insensitively.
DEFAULT_SHORT_PARTIAL_CATEGORIES = frozenset({"person", "per", "pers"})


# ---------------------------------------------------------------------------
# Penn-Treebank-style tokenization (the classic sed rule set)

_PTB_EARLY = [
    (re.compile(r'^"'), "`` "),
    (re.compile(r'([ \(\[{<])"'), r"\1 `` "),
    (re.compile(r"\.\.\."), " ... "),
    (re.compile(r"[,;:@#$%&]"), r" \g<0> "),
    # sentence-final period, possibly followed by closing brackets/quotes
    (re.compile(r"([^\.])(\.)([\]\)}>\"']*)[ \t]*$"), r"\1 \2\3 "),
    (re.compile(r"[?!]"), r" \g<0> "),
    (re.compile(r"[\]\[\(\)\{\}<>]"), r" \g<0> "),
    (re.compile(r"--"), " -- "),
]

_PTB_LATE = [
    (re.compile(r'"'), " '' "),
    (re.compile(r"([^'])' "), r"\1 ' "),
    (re.compile(r"'([sSmMdD]) "), r" '\1 "),
    (re.compile(r"('ll|'LL|'re|'RE|'ve|'VE|n't|N'T) "), r" \1 "),
    (re.compile(r" ([Cc])annot "), r" \1an not "),
    (re.compile(r" ([Dd])'ye "), r" \1' ye "),
    (re.compile(r" ([Gg])imme "), r" \1im me "),
    (re.compile(r" ([Gg])onna "), r" \1on na "),
    (re.compile(r" ([Gg])otta "), r" \1ot ta "),
    (re.compile(r" ([Ll])emme "), r" \1em me "),
    (re.compile(r" ([Mm])ore'n "), r" \1ore 'n "),
    (re.compile(r" '([Tt])is "), r" '\1 is "),
    (re.compile(r" '([Tt])was "), r" '\1 was "),
    (re.compile(r" ([Ww])anna "), r" \1an na "),
]


def ptb_tokenize(text: str) -> list[str]:
    """Tokenize with the standard Penn Treebank sed rules (punctuation
    splitting, directional quotes, clitic contractions)."""
    s = text
    for pat, rep in _PTB_EARLY:
        s = pat.sub(rep, s)
    s = " " + s + " "
    for pat, rep in _PTB_LATE:
        s = pat.sub(rep, s)
    return s.split()


_PAREN = re.compile(r"\([^()]*\)")
# period, comma, semi-colon, colon, forward slash, backslash, question mark
_TRAILING_PUNCT = ".,;:/\\?"


def normalize_entry(raw: str) -> list[str]:
    """Normalize a raw lexicon entry for matching: drop parenthesized
    spans, strip trailing punctuation, PTB-tokenize, lower-case.

    An empty result means the entry should be skipped.
    """
    s = raw
    while True:
        stripped = _PAREN.sub(" ", s)
        if stripped == s:
            break
        s = stripped
    s = s.strip().rstrip(_TRAILING_PUNCT + " \t")
    return [t.lower() for t in ptb_tokenize(s)]


# ---------------------------------------------------------------------------
# Lexicon storage and index


class Lexicon:
    """Per-category entry sets plus n-gram indexes for matching.

    The indexes map a token n-gram to the minimum length of any entry
    having it as a prefix/suffix; a partial match of n tokens is legal
    when that minimum is at most 2n (the "at least half the entry" rule).
    """

    def __init__(self, name: str = "lex",
                 short_partial_categories=DEFAULT_SHORT_PARTIAL_CATEGORIES):
        self.name = name
        self.entries: dict[str, set[tuple[str, ...]]] = {}
        self.max_len: dict[str, int] = {}
        self.prefix_min: dict[str, dict[tuple[str, ...], int]] = {}
        self.suffix_min: dict[str, dict[tuple[str, ...], int]] = {}
        self.skipped = 0
        self._short_ok = {c.lower() for c in short_partial_categories}

    def add(self, category: str, tokens) -> None:
        entry = tuple(tokens)
        if not entry:
            self.skipped += 1
            return
        ents = self.entries.setdefault(category, set())
        if entry in ents:
            return
        ents.add(entry)
        m = len(entry)
        self.max_len[category] = max(self.max_len.get(category, 0), m)
        pmin = self.prefix_min.setdefault(category, {})
        smin = self.suffix_min.setdefault(category, {})
        for k in range(1, m + 1):
            pre, suf = entry[:k], entry[m - k:]
            if m < pmin.get(pre, m + 1):
                pmin[pre] = m
            if m < smin.get(suf, m + 1):
                smin[suf] = m

    def categories(self) -> list[str]:
        return sorted(self.entries.keys())

    def size(self, category: str) -> int:
        return len(self.entries.get(category, ()))

    def allows_short_partial(self, category: str) -> bool:
        return category.lower() in self._short_ok


def load_lexicon(path, category_map=None, name=None,
                 short_partial_categories=DEFAULT_SHORT_PARTIAL_CATEGORIES) -> Lexicon:
    """Read a "CATEGORY<TAB>raw entry" file into a Lexicon.

    Entries are normalized and deduplicated; entries that normalize to
    nothing are counted in `lexicon.skipped`. With a category_map, labels
    missing from the map are a load error.
    """
    lex = Lexicon(name or str(path), short_partial_categories)
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise DataError(f"{path}:{ln}: expected CATEGORY<TAB>entry")
            label, raw = line.split("\t", 1)
            if category_map is not None:
                if label not in category_map:
                    raise DataError(f"{path}:{ln}: unknown category {label!r}")
                label = category_map[label]
            lex.add(label, normalize_entry(raw))
    return lex


# ---------------------------------------------------------------------------
# Matching


def _candidates(lex: Lexicon, category: str, toks: list[str], mode: str):
    """All legal (start, length, kind) spans for one category."""
    entries = lex.entries.get(category, set())
    pmin = lex.prefix_min.get(category, {})
    smin = lex.suffix_min.get(category, {})
    T = len(toks)
    allow_short = lex.allows_short_partial(category)
    out = []
    for n in range(1, min(lex.max_len.get(category, 0), T) + 1):
        for s in range(T - n + 1):
            gram = tuple(toks[s:s + n])
            exact = gram in entries
            if mode == "exact":
                if exact:
                    out.append((s, n, EXACT))
                continue
            if mode == "collobert":
                # first-word matching: any prefix counts, no length rules
                if exact:
                    out.append((s, n, EXACT))
                elif gram in pmin:
                    out.append((s, n, PREFIX))
                continue
            # partial mode
            if exact:
                out.append((s, n, EXACT))
                continue
            is_prefix = pmin.get(gram, 2 * T + 1) <= 2 * n
            is_suffix = smin.get(gram, 2 * T + 1) <= 2 * n
            if not (is_prefix or is_suffix):
                continue
            if n < 2 and not allow_short:
                continue
            out.append((s, n, PREFIX if is_prefix else SUFFIX))
    return out


def _resolve(cands, prefer_exact: bool):
    """Greedy non-overlapping selection under the priority order:
    exactness (partial mode only), then longer, then earlier."""
    if prefer_exact:
        key = lambda c: (c[2] != EXACT, -c[1], c[0])
    else:
        key = lambda c: (-c[1], c[0])
    covered = [False] * (max((s + n for s, n, _ in cands), default=0))
    accepted = []
    for s, n, kind in sorted(cands, key=key):
        if any(covered[s:s + n]):
            continue
        for i in range(s, s + n):
            covered[i] = True
        accepted.append((s, n, kind))
    return accepted


def _mark_span(row: list[str], s: int, n: int, kind: str) -> None:
    if kind == EXACT:
        if n == 1:
            row[s] = "S"
        else:
            row[s] = "B"
            for i in range(s + 1, s + n - 1):
                row[i] = "I"
            row[s + n - 1] = "E"
    elif kind == PREFIX:
        # never reaches the entry's end, so no E
        row[s] = "B"
        for i in range(s + 1, s + n):
            row[i] = "I"
    else:
        # never includes the entry's start, so no B
        for i in range(s, s + n - 1):
            row[i] = "I"
        row[s + n - 1] = "E"


def match_sentence(lex: Lexicon, tokens, mode: str = "partial") -> dict[str, list[str]]:
    """Per-category B/I/E/S/O marks for a token sequence.

    Matching is case-insensitive (tokens are lower-cased here). Modes:
    partial applies the half-length prefix/suffix rule with the 2-token
    minimum outside Person categories; exact accepts whole entries only;
    collobert accepts any prefix, treating exact and partial alike.
    """
    if mode not in (EXACT, "partial", "collobert"):
        raise ConfigError(f"unknown lexicon matching mode {mode!r}")
    toks = [t.lower() for t in tokens]
    marks = {}
    for cat in lex.categories():
        row = ["O"] * len(toks)
        cands = _candidates(lex, cat, toks, mode)
        for s, n, kind in _resolve(cands, prefer_exact=(mode == "partial")):
            _mark_span(row, s, n, kind)
        marks[cat] = row
    return marks


def encode_lexicon_features(marks: dict[str, list[str]], encoding: str = "bioes") -> np.ndarray:
    """Encode marks as per-token vectors: 5-d one-hot per category for
    bioes, a single 0/1 per category for yn. Categories in sorted order."""
    cats = sorted(marks.keys())
    if not cats:
        return np.zeros((0, 0))
    T = len(marks[cats[0]])
    if encoding == "bioes":
        out = np.zeros((T, 5 * len(cats)))
        for j, cat in enumerate(cats):
            for t, m in enumerate(marks[cat]):
                out[t, 5 * j + _BIOES_COL[m]] = 1.0
    elif encoding == "yn":
        out = np.zeros((T, len(cats)))
        for j, cat in enumerate(cats):
            for t, m in enumerate(marks[cat]):
                if m != "O":
                    out[t, j] = 1.0
    else:
        raise ConfigError(f"unknown lexicon encoding {encoding!r}")
    return out


class LexiconFeature:
    """One lexicon applied with a fixed mode and encoding: a reusable
    feature block producing (T, dim) arrays."""

    def __init__(self, lexicon: Lexicon, mode: str = "partial", encoding: str = "bioes"):
        if mode not in (EXACT, "partial", "collobert"):
            raise ConfigError(f"unknown lexicon matching mode {mode!r}")
        if encoding not in ("bioes", "yn"):
            raise ConfigError(f"unknown lexicon encoding {encoding!r}")
        self.lexicon = lexicon
        self.mode = mode
        self.encoding = encoding

    def feature_dim(self) -> int:
        per_cat = 5 if self.encoding == "bioes" else 1
        return per_cat * len(self.lexicon.categories())

    def featurize(self, tokens) -> np.ndarray:
        marks = match_sentence(self.lexicon, tokens, self.mode)
        out = encode_lexicon_features(marks, self.encoding)
        if out.size == 0:
            return np.zeros((len(tokens), 0))
        return out
