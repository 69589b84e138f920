import json

from typing import Dict, List
from dataclasses import dataclass, field

from .conllu import Treebank
from .layers import normalize_word
from .tagsets import PUNCT_TAGS
from .utils import JptdpError, split_subtype

REPORT_KEYS = ("upos", "uas", "las", "mixed", "tokens")


class EvaluationError(JptdpError):
    pass


@dataclass
class SentenceMetrics:
    tokens: int = 0
    upos: int = 0
    uas: int = 0
    las: int = 0
    mixed: int = 0


@dataclass
class Metrics:
    upos_acc: float
    uas: float
    las: float
    mixed: float
    token_count: int
    per_sentence: List[SentenceMetrics] = field(default_factory=list)

    def report(self) -> Dict:
        return {
            "upos": round(self.upos_acc, 4),
            "uas": round(self.uas, 4),
            "las": round(self.las, 4),
            "mixed": round(self.mixed, 4),
            "tokens": self.token_count
        }

    def format_key_values(self) -> str:
        return "\n".join((
            f"upos={self.upos_acc:.4f}",
            f"uas={self.uas:.4f}",
            f"las={self.las:.4f}",
            f"mixed={self.mixed:.4f}",
            f"tokens={self.token_count}"
        ))

    def format_json(self) -> str:
        return json.dumps(self.report())


def evaluate(gold: Treebank,
             pred: Treebank,
             include_punct: bool = True,
             strip_subtypes: bool = False) -> Metrics:
    """Compare predicted UPOS, heads and relations against gold.

    Tokens are aligned by position; the gold tag decides punctuation
    filtering, so the arguments are not interchangeable.
    """
    if len(gold.sentences) != len(pred.sentences):
        raise EvaluationError(f"gold has {len(gold.sentences)} sentences, "
                              f"prediction has {len(pred.sentences)}")

    def relation(deprel: str) -> str:
        return split_subtype(deprel) if strip_subtypes else deprel

    totals = SentenceMetrics()
    per_sentence = []

    for index, (g, p) in enumerate(zip(gold.sentences, pred.sentences)):
        if g.forms != p.forms:
            raise EvaluationError(f"sentence {index}: gold and predicted "
                                  f"words do not match")

        counts = SentenceMetrics()

        for gt, pt in zip(g.tokens, p.tokens):
            if not include_punct and gt.upos in PUNCT_TAGS:
                continue

            tag_ok = gt.upos == pt.upos
            head_ok = gt.head == pt.head
            labeled_ok = head_ok and relation(gt.deprel) == relation(pt.deprel)

            counts.tokens += 1
            counts.upos += tag_ok
            counts.uas += head_ok
            counts.las += labeled_ok
            counts.mixed += tag_ok and labeled_ok

        per_sentence.append(counts)

        totals.tokens += counts.tokens
        totals.upos += counts.upos
        totals.uas += counts.uas
        totals.las += counts.las
        totals.mixed += counts.mixed

    if not totals.tokens:
        raise EvaluationError("no tokens to evaluate")

    return Metrics(
        upos_acc=totals.upos / totals.tokens,
        uas=totals.uas / totals.tokens,
        las=totals.las / totals.tokens,
        mixed=totals.mixed / totals.tokens,
        token_count=totals.tokens,
        per_sentence=per_sentence
    )


def oov_rate(train: Treebank, test: Treebank) -> float:
    known = {normalize_word(t.form) for s in train for t in s.tokens}
    forms = [normalize_word(t.form) for s in test for t in s.tokens]

    if not known or not forms:
        raise EvaluationError("OOV rate needs non-empty treebanks")

    return sum(f not in known for f in forms) / len(forms)


__all__ = ("Metrics", "SentenceMetrics", "EvaluationError", "REPORT_KEYS",
           "evaluate", "oov_rate")
