"""Evaluation arithmetic: confusion matrices, per-class precision/recall/F1, macro-F1.

Conventions are fixed so reports are reproducible: the Abusive class (1) is
the positive class, macro-F1 is the unweighted mean of the two per-class F1
values, and any 0/0 ratio is defined as 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Label
from .errors import EmptyInput, LengthMismatch


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 counts. tp/fn count gold-Abusive rows, fp/tn gold-Non-Abusive rows."""

    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fn", "fp", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ClassReport:
    per_class: dict[Label, PRF]
    macro_f1: float
    accuracy: float


def confusion(gold: Sequence[Label], pred: Sequence[Label]) -> ConfusionMatrix:
    """Count the four quadrants of gold vs predicted binary labels."""
    if len(gold) != len(pred):
        raise LengthMismatch(f"gold has {len(gold)} labels, pred has {len(pred)}")
    if not gold:
        raise EmptyInput("cannot build a confusion matrix from empty inputs")
    tp = fn = fp = tn = 0
    for g, p in zip(gold, pred):
        if g == Label.ABUSIVE:
            if p == Label.ABUSIVE:
                tp += 1
            else:
                fn += 1
        else:
            if p == Label.ABUSIVE:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fn=fn, fp=fp, tn=tn)


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def per_class_prf(cm: ConfusionMatrix) -> dict[Label, PRF]:
    """Precision/recall/F1 for each class, with the 0/0 -> 0 convention."""
    p_abusive = _safe_div(cm.tp, cm.tp + cm.fp)
    r_abusive = _safe_div(cm.tp, cm.tp + cm.fn)
    p_clean = _safe_div(cm.tn, cm.tn + cm.fn)
    r_clean = _safe_div(cm.tn, cm.tn + cm.fp)
    return {
        Label.ABUSIVE: PRF(
            precision=p_abusive,
            recall=r_abusive,
            f1=_safe_div(2 * p_abusive * r_abusive, p_abusive + r_abusive),
        ),
        Label.NON_ABUSIVE: PRF(
            precision=p_clean,
            recall=r_clean,
            f1=_safe_div(2 * p_clean * r_clean, p_clean + r_clean),
        ),
    }


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of the two per-class F1 values."""
    prf = per_class_prf(cm)
    return (prf[Label.ABUSIVE].f1 + prf[Label.NON_ABUSIVE].f1) / 2.0


def class_report(cm: ConfusionMatrix) -> ClassReport:
    """Full report: per-class PRF, macro-F1, and accuracy."""
    prf = per_class_prf(cm)
    return ClassReport(
        per_class=prf,
        macro_f1=(prf[Label.ABUSIVE].f1 + prf[Label.NON_ABUSIVE].f1) / 2.0,
        accuracy=_safe_div(cm.tp + cm.tn, cm.total),
    )
