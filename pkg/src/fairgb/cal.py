"""Contribution alignment: per-sample logit-gradient contributions, group
weights that equalize them, the weighted mixup loss, and the re-weighting (RW)
and over-sampling (OS) baselines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cnm import AugmentedGraph, MixedEgoNetwork
from .graph import Graph, GroupTable
from .nn import ContractError, one_hot, softmax, softmax_cross_entropy

DEFAULT_FLOOR = 1e-3
DEFAULT_CAP = 100.0


def contribution(logits, y) -> float:
    """L1 norm of d CE(logits, y) / d logits."""
    logits = np.asarray(logits, dtype=np.float64)
    return float(contributions(logits[None, :], np.array([y]))[0])


def contributions(logits: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.abs(softmax(logits) - one_hot(y, logits.shape[1])).sum(axis=1)


@dataclass
class ContributionLedger:
    R: dict = field(default_factory=dict)
    epoch: int | None = None

    @property
    def total(self) -> float:
        return float(sum(self.R.values()))


def accumulate(keys, r, epoch=None, ledger: ContributionLedger | None = None) -> ContributionLedger:
    """Sum contributions ``r`` into the demographic group named by each key."""
    ledger = ContributionLedger(epoch=epoch) if ledger is None else ledger
    for k, v in zip(keys, r):
        if v < 0:
            raise ContractError("contributions are non-negative")
        ledger.R[k] = ledger.R.get(k, 0.0) + float(v)
    return ledger


def accumulate_pairs(pairs, r_i, r_j, epoch=None) -> ContributionLedger:
    """Ledger over both sides of every mixed pair (original node and counterexample)."""
    keys = [p.group_i for p in pairs] + [p.group_j for p in pairs]
    return accumulate(keys, np.concatenate([np.asarray(r_i, float), np.asarray(r_j, float)]), epoch)


@dataclass(frozen=True)
class GroupWeights:
    w: dict
    floored: frozenset = frozenset()
    capped: frozenset = frozenset()

    def lookup(self, keys) -> np.ndarray:
        try:
            return np.array([self.w[k] for k in keys], dtype=np.float64)
        except KeyError as e:
            raise ContractError(f"no weight for group {e.args[0]}") from None


def group_weights(ledger: ContributionLedger, floor: float = DEFAULT_FLOOR,
                  cap: float | None = DEFAULT_CAP) -> GroupWeights:
    """w[g] = sum_h R[h] / R[g], with R[g] clamped below at ``floor``.

    Weights above ``cap`` times the mean weight are clipped to that value.
    """
    total = ledger.total
    if not ledger.R or total <= 0:
        raise ValueError("no contributions")
    w, floored = {}, set()
    for k, r in ledger.R.items():
        if r < floor:
            floored.add(k)
        w[k] = total / max(r, floor)
    capped = set()
    if cap is not None:
        limit = cap * float(np.mean(list(w.values())))
        for k, v in w.items():
            if v > limit:
                w[k] = limit
                capped.add(k)
    return GroupWeights(w, frozenset(floored), frozenset(capped))


def weighted_mixup_loss(logits, y_i, y_j, lam, w_i=None, w_j=None):
    """Mean over rows of w_i*lam*CE(y_i) + w_j*(1-lam)*CE(y_j), and d/d logits.

    Weights are treated as constants. With unit weights this is the plain
    decomposed mixup loss.
    """
    logits = np.asarray(logits, dtype=np.float64)
    m, c = logits.shape
    lam = np.asarray(lam, dtype=np.float64)
    w_i = np.ones(m) if w_i is None else np.asarray(w_i, dtype=np.float64)
    w_j = np.ones(m) if w_j is None else np.asarray(w_j, dtype=np.float64)
    loss_i, g_i = softmax_cross_entropy(logits, np.asarray(y_i, dtype=np.int64))
    loss_j, g_j = softmax_cross_entropy(logits, np.asarray(y_j, dtype=np.int64))
    a, b = w_i * lam, w_j * (1.0 - lam)
    loss = float(np.sum(a * loss_i + b * loss_j) / m)
    grad = (a[:, None] * g_i + b[:, None] * g_j) / m
    return loss, grad


def mixup_loss(logits, y_i, y_j, lam):
    return weighted_mixup_loss(logits, y_i, y_j, lam)


def cal_loss(logits, pairs, weights: GroupWeights):
    """Contribution alignment loss over mixed nodes whose logits are the rows of ``logits``."""
    y_i = [p.group_i[0] for p in pairs]
    y_j = [p.group_j[0] for p in pairs]
    lam = [p.lam for p in pairs]
    w_i = weights.lookup([p.group_i for p in pairs])
    w_j = weights.lookup([p.group_j for p in pairs])
    return weighted_mixup_loss(logits, y_i, y_j, lam, w_i, w_j)


def rw_weights(groups: GroupTable, n_train: int | None = None) -> dict:
    """Per-node weight N / |D_{y,s}| for every train node."""
    n_train = groups.num_train if n_train is None else n_train
    out = {}
    for k, members in groups.groups.items():
        if len(members) == 0:
            continue
        for v in members:
            out[int(v)] = n_train / len(members)
    return out


def oversample(graph: Graph, groups: GroupTable, rng: np.random.Generator) -> AugmentedGraph:
    """Duplicate randomly drawn members of each group until every group has the
    size of the largest one. Copies keep features, label, sensitive value and
    the complete neighbor list of their source node."""
    target = max(groups.counts.values())
    if target < 1:
        raise ValueError("all groups are empty")
    dups = []
    for k, members in groups.groups.items():
        need = target - len(members)
        if need > 0 and len(members):
            for v in members[rng.integers(len(members), size=need)]:
                v = int(v)
                dups.append(MixedEgoNetwork(graph.features[v].copy(), (k[0], k[0], 1.0), (k, k),
                                            graph.neighbors(v).copy(), (v, v)))
    return AugmentedGraph.from_networks(graph, dups)
