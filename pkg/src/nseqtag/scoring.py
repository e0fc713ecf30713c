"""Span-exact precision / recall / F1 scoring in the CoNLL style."""

from __future__ import annotations

from .errors import DataError


def _prf(correct: int, predicted: int, gold: int):
    p = 100.0 * correct / predicted if predicted else 0.0
    r = 100.0 * correct / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


class EvalReport:
    """Micro-averaged span scores, overall and per category."""

    def __init__(self):
        self.gold = 0
        self.predicted = 0
        self.correct = 0
        self.by_category: dict[str, list[int]] = {}  # cat -> [gold, predicted, correct]

    def _cat(self, cat):
        return self.by_category.setdefault(cat, [0, 0, 0])

    @property
    def precision(self) -> float:
        return round(_prf(self.correct, self.predicted, self.gold)[0], 2)

    @property
    def recall(self) -> float:
        return round(_prf(self.correct, self.predicted, self.gold)[1], 2)

    @property
    def f1(self) -> float:
        return round(_prf(self.correct, self.predicted, self.gold)[2], 2)

    def category_scores(self, cat: str):
        g, pr, c = self.by_category[cat]
        p, r, f = _prf(c, pr, g)
        return round(p, 2), round(r, 2), round(f, 2)

    def format(self) -> str:
        """conlleval-style table followed by a machine-readable block."""
        lines = [
            "overall: precision: %6.2f%%; recall: %6.2f%%; FB1: %6.2f  (%d/%d/%d)"
            % (self.precision, self.recall, self.f1,
               self.correct, self.predicted, self.gold)
        ]
        for cat in sorted(self.by_category):
            g, pr, c = self.by_category[cat]
            p, r, f = self.category_scores(cat)
            lines.append(
                "%17s: precision: %6.2f%%; recall: %6.2f%%; FB1: %6.2f  (%d/%d/%d)"
                % (cat, p, r, f, c, pr, g)
            )
        lines.append("")
        lines.append(f"overall_p={self.precision:.2f}")
        lines.append(f"overall_r={self.recall:.2f}")
        lines.append(f"overall_f1={self.f1:.2f}")
        for cat in sorted(self.by_category):
            p, r, f = self.category_scores(cat)
            lines.append(f"{cat}_p={p:.2f}")
            lines.append(f"{cat}_r={r:.2f}")
            lines.append(f"{cat}_f1={f:.2f}")
        return "\n".join(lines)


def evaluate_f1(gold_spans, predicted_spans) -> EvalReport:
    """Score aligned per-sentence span lists.

    A predicted span is correct only when start, end, and category all
    match a gold span of the same sentence.
    """
    if len(gold_spans) != len(predicted_spans):
        raise DataError(
            f"corpus length mismatch: {len(gold_spans)} gold vs "
            f"{len(predicted_spans)} predicted sentences"
        )
    report = EvalReport()
    for gold, pred in zip(gold_spans, predicted_spans):
        gold_set = set(gold)
        if len(gold_set) != len(gold):
            raise DataError("duplicate gold spans in a sentence")
        for span in gold:
            report.gold += 1
            report._cat(span[2])[0] += 1
        for span in pred:
            report.predicted += 1
            cat = span[2]
            report._cat(cat)[1] += 1
            if tuple(span) in gold_set:
                report.correct += 1
                report._cat(cat)[2] += 1
    return report
