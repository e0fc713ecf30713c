"""BIOES tag scheme: tagset construction, span <-> tag codecs with
deterministic repair of invalid sequences, IOB1/BIO2 conversion, and the
structural-validity tables used by constrained decoding.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

PREFIXES = ("B", "I", "E", "S")


def split_tag(tag: str):
    """Return (prefix, category); "O" maps to ("O", None)."""
    if tag == "O":
        return "O", None
    if "-" not in tag:
        raise DataError(f"malformed tag {tag!r}: missing dash")
    prefix, cat = tag.split("-", 1)
    if prefix not in PREFIXES:
        raise DataError(f"malformed tag {tag!r}: unknown prefix {prefix!r}")
    return prefix, cat


def _split_lenient(tag: str):
    """Like split_tag but treats anything unparseable as O (decode totality)."""
    if tag == "O" or "-" not in tag:
        return "O", None
    prefix, cat = tag.split("-", 1)
    if prefix not in PREFIXES or not cat:
        return "O", None
    return prefix, cat


class TagSet:
    """The BIOES expansion of a category set: "O" plus B/I/E/S per category."""

    def __init__(self, categories):
        self.categories = sorted(set(categories))
        self.tags = ["O"]
        for cat in self.categories:
            for p in PREFIXES:
                self.tags.append(f"{p}-{cat}")
        self._ids = {t: i for i, t in enumerate(self.tags)}

    def __len__(self) -> int:
        return len(self.tags)

    def id_of(self, tag: str) -> int:
        try:
            return self._ids[tag]
        except KeyError:
            raise DataError(f"tag {tag!r} not in tagset") from None

    def tag_of(self, i: int) -> str:
        return self.tags[i]

    def encode(self, tags) -> np.ndarray:
        return np.array([self.id_of(t) for t in tags], dtype=np.intp)

    def decode(self, ids) -> list[str]:
        return [self.tags[i] for i in ids]

    def constraint_masks(self):
        """(start_ok, trans_ok, end_ok) boolean tables for structurally
        valid BIOES sequences: an entity must open with B/S and close with
        E/S, and I/E must continue a same-category B/I."""
        K = len(self.tags)
        parsed = [_split_lenient(t) for t in self.tags]
        opens_ok = np.array([p in ("O", "B", "S") for p, _ in parsed])
        closes_ok = np.array([p in ("O", "E", "S") for p, _ in parsed])
        trans = np.zeros((K, K), dtype=bool)
        for i, (pi, ci) in enumerate(parsed):
            for j, (pj, cj) in enumerate(parsed):
                if pi in ("O", "E", "S"):
                    trans[i, j] = pj in ("O", "B", "S")
                else:  # pi in ("B", "I"): entity stays open, same category
                    trans[i, j] = pj in ("I", "E") and ci == cj
        return opens_ok, trans, closes_ok


def is_valid_bioes(tags) -> bool:
    """Structural validity: every entity opened is closed, I/E continue a
    same-category open entity, and nothing is open at either boundary."""
    open_cat = None
    for tag in tags:
        prefix, cat = _split_lenient(tag)
        if open_cat is None:
            if prefix in ("I", "E"):
                return False
            if prefix == "B":
                open_cat = cat
        else:
            if prefix in ("O", "B", "S"):
                return False
            if cat != open_cat:
                return False
            if prefix == "E":
                open_cat = None
    return open_cat is None


def spans_to_bioes(spans, length: int) -> list[str]:
    """Encode (start, end, category) spans (inclusive ends) as BIOES tags.

    Spans must be in range and non-overlapping.
    """
    tags = ["O"] * length
    occupied = [False] * length
    for start, end, cat in spans:
        if not (0 <= start <= end < length):
            raise ValueError(f"span ({start},{end},{cat}) out of range for length {length}")
        if any(occupied[start:end + 1]):
            raise ValueError(f"span ({start},{end},{cat}) overlaps another span")
        for i in range(start, end + 1):
            occupied[i] = True
        if start == end:
            tags[start] = f"S-{cat}"
        else:
            tags[start] = f"B-{cat}"
            for i in range(start + 1, end):
                tags[i] = f"I-{cat}"
            tags[end] = f"E-{cat}"
    return tags


def bioes_to_spans(tags) -> list[tuple[int, int, str]]:
    """Decode BIOES tags to spans, repairing invalid sequences.

    Repair is a deterministic left-to-right scan: an I/E with no
    compatible open entity opens one (as if it were B), and an entity
    still open at a boundary (O, a different category, or sentence end)
    closes at the previous token. Never fails.
    """
    spans = []
    open_start = None
    open_cat = None

    def close(end: int):
        nonlocal open_start, open_cat
        if open_cat is not None:
            spans.append((open_start, end, open_cat))
            open_start = open_cat = None

    for t, tag in enumerate(tags):
        prefix, cat = _split_lenient(tag)
        if prefix == "O":
            close(t - 1)
        elif prefix == "B":
            close(t - 1)
            open_start, open_cat = t, cat
        elif prefix == "S":
            close(t - 1)
            spans.append((t, t, cat))
        elif prefix == "I":
            if open_cat != cat:
                close(t - 1)
                open_start, open_cat = t, cat
        else:  # E
            if open_cat == cat:
                close(t)
            else:
                close(t - 1)
                spans.append((t, t, cat))
    close(len(tags) - 1)
    return spans


# ---------------------------------------------------------------------------
# Source dialect conversion (CoNLL-2003 ships IOB1)


def _bio_spans(tags, dialect: str):
    """Span extraction shared by IOB1 and BIO2.

    The dialects differ only in how writers mark entity starts: reading
    robustly (B- always opens, a stray I- opens) yields identical spans
    for both. E-/S- prefixes are rejected as belonging to neither.
    """
    spans = []
    open_start = open_cat = None

    def close(end):
        nonlocal open_start, open_cat
        if open_cat is not None:
            spans.append((open_start, end, open_cat))
            open_start = open_cat = None

    for t, tag in enumerate(tags):
        prefix, cat = split_tag(tag)
        if prefix in ("E", "S"):
            raise DataError(f"tag {tag!r} is not {dialect}")
        if prefix == "O":
            close(t - 1)
        elif prefix == "B":
            close(t - 1)
            open_start, open_cat = t, cat
        else:  # I
            if open_cat != cat:
                close(t - 1)
                open_start, open_cat = t, cat
    close(len(tags) - 1)
    return spans


def convert_to_bioes(tags, dialect: str) -> list[str]:
    """Convert one sentence's tags to BIOES, preserving span semantics."""
    if dialect in ("iob1", "bio2"):
        spans = _bio_spans(tags, dialect)
    elif dialect == "bioes":
        for t in tags:
            split_tag(t)  # malformed tags are an error even though repair could cope
        spans = bioes_to_spans(tags)
    else:
        raise DataError(f"unknown tag dialect {dialect!r}")
    return spans_to_bioes(spans, len(tags))


def detect_dialect(tag_sentences) -> str:
    """Guess the tag dialect of a corpus.

    Any E-/S- prefix means BIOES. A B- tag not preceded by a same-category
    tag means BIO2 (in IOB1, B- only splits adjacent entities). Otherwise
    IOB1, under which pure I-/O data decodes identically either way.
    """
    saw_bio2_start = False
    for tags in tag_sentences:
        prev_cat = None
        for tag in tags:
            prefix, cat = split_tag(tag)
            if prefix in ("E", "S"):
                return "bioes"
            if prefix == "B" and cat != prev_cat:
                saw_bio2_start = True
            prev_cat = cat if prefix in ("B", "I") else None
    return "bio2" if saw_bio2_start else "iob1"
