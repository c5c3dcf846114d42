"""Group-fairness gaps and utility metrics for binary node classification."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


class UndefinedMetric(ValueError):
    pass


def _select(mask, *arrays):
    if mask is None:
        return [np.asarray(a) for a in arrays]
    mask = np.asarray(mask)
    return [np.asarray(a)[mask] for a in arrays]


def _rate_gap(a, b) -> float:
    """|mean(a == 1) - mean(b == 1)| with a single rounding step."""
    ca, cb = int(np.sum(a == 1)), int(np.sum(b == 1))
    return abs(ca * len(b) - cb * len(a)) / (len(a) * len(b))


def delta_sp(preds, sens, mask=None) -> float:
    """|P(yhat=1 | s=0) - P(yhat=1 | s=1)|."""
    preds, sens = _select(mask, preds, sens)
    a, b = preds[sens == 0], preds[sens == 1]
    if len(a) == 0 or len(b) == 0:
        raise UndefinedMetric("statistical parity needs both sensitive groups")
    return _rate_gap(a, b)


def _gap_within(preds, labels, sens, label):
    a = preds[(sens == 0) & (labels == label)]
    b = preds[(sens == 1) & (labels == label)]
    if len(a) == 0 or len(b) == 0:
        raise UndefinedMetric(f"both sensitive groups need a node with label {label}")
    return _rate_gap(a, b)


def delta_eo(preds, labels, sens, mask=None) -> float:
    """Equal-opportunity gap |TPR(s=0) - TPR(s=1)|."""
    preds, labels, sens = _select(mask, preds, labels, sens)
    return _gap_within(preds, labels, sens, 1)


def delta_fpr(preds, labels, sens, mask=None) -> float:
    preds, labels, sens = _select(mask, preds, labels, sens)
    return _gap_within(preds, labels, sens, 0)


def auc(scores, labels, mask=None) -> float:
    """Probability a random positive outscores a random negative; ties count half."""
    scores, labels = _select(mask, scores, labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("AUC needs both classes")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def f1_acc(preds, labels, mask=None) -> tuple[float, float]:
    preds, labels = _select(mask, preds, labels)
    if len(preds) == 0:
        raise UndefinedMetric("empty mask")
    tp = int(np.sum((preds == 1) & (labels == 1)))
    fp = int(np.sum((preds == 1) & (labels != 1)))
    fn = int(np.sum((preds != 1) & (labels == 1)))
    acc = int(np.sum(preds == labels)) / len(preds)
    denom = 2 * tp + fp + fn
    return (2 * tp / denom if tp else 0.0), acc


@dataclass(frozen=True)
class Evaluation:
    auc: float
    f1: float
    acc: float
    delta_sp: float
    delta_eo: float
    # auxiliary: max of TPR and FPR gaps (full equalized odds)
    delta_eodds: float

    def as_percent(self) -> dict:
        return {k: 100.0 * v for k, v in asdict(self).items()}


def evaluate(logits, labels, sens, mask) -> Evaluation:
    """Utility and fairness of argmax predictions; scores are P(class 1)."""
    logits = np.asarray(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    prob = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    preds = logits.argmax(axis=1)
    preds, scores, labels, sens = _select(mask, preds, prob[:, 1], labels, sens)
    f1, acc = f1_acc(preds, labels)
    eo = delta_eo(preds, labels, sens)
    return Evaluation(
        auc=auc(scores, labels), f1=f1, acc=acc,
        delta_sp=delta_sp(preds, sens), delta_eo=eo,
        delta_eodds=max(eo, delta_fpr(preds, labels, sens)),
    )
