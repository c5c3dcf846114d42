"""Counterfactual node mixup.

Each train node is paired with a counterexample that differs from it in
exactly one of (label, sensitive value). The pair's features, labels and
neighbor distributions are interpolated with a Beta-distributed ratio, and the
resulting ego-network is injected into the graph as a synthetic node that
reads from its sampled neighbors (base nodes never read from it).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .encoders import GraphView
from .graph import DegreeDistribution, Graph, GroupTable, NeighborDistribution, degree_distribution, neighbor_distribution

INTER_DOMAIN = "inter_domain"
INTER_CLASS = "inter_class"
# degenerate fallback when a node has no counterexample of either kind
IDENTITY = "identity"


class NoCounterexample(LookupError):
    pass


class IsolatedPair(ValueError):
    pass


@dataclass(frozen=True)
class MixPair:
    i: int
    j: int
    kind: str
    lam: float
    group_i: tuple
    group_j: tuple

    def check(self):
        (yi, si), (yj, sj) = self.group_i, self.group_j
        if self.kind == INTER_DOMAIN:
            ok = yi == yj and si != sj
        elif self.kind == INTER_CLASS:
            ok = yi != yj and si == sj
        else:
            ok = self.i == self.j and self.lam == 1.0
        if not ok or not 0.0 <= self.lam <= 1.0:
            raise AssertionError(f"pair violates its {self.kind} constraint: {self}")


@dataclass(frozen=True)
class MixedEgoNetwork:
    x_mix: np.ndarray
    label_pair: tuple  # (y_i, y_j, lam)
    source_groups: tuple
    neighbors: np.ndarray
    sources: tuple = ()


def candidate_pool(groups: GroupTable, key, kind) -> np.ndarray:
    y, s = key
    if kind == INTER_DOMAIN:
        keys = [(y, b) for b in range(groups.num_sensitive) if b != s]
    elif kind == INTER_CLASS:
        keys = [(t, s) for t in range(groups.num_classes) if t != y]
    else:
        raise ValueError(f"unknown pair kind {kind!r}")
    parts = [groups.get(k) for k in keys]
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def sample_counterexample(groups: GroupTable, i: int, kind: str, rng: np.random.Generator) -> int:
    key = groups.membership[int(i)]
    pool = candidate_pool(groups, key, kind)
    if len(pool) == 0:
        raise NoCounterexample(f"no counterexample for group {key}")
    return int(pool[rng.integers(len(pool))])


def choose_kind(eta: float, rng: np.random.Generator) -> str:
    """Inter-class with probability ``eta``, else inter-domain."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    return INTER_DOMAIN if rng.random() >= eta else INTER_CLASS


def mix_features_labels(x_i, x_j, y_i, y_j, lam):
    x_i, x_j = np.asarray(x_i, dtype=np.float64), np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape:
        raise ValueError(f"feature dimension mismatch {x_i.shape} vs {x_j.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    return lam * x_i + (1.0 - lam) * x_j, (int(y_i), int(y_j), float(lam))


def soft_label(label_pair, num_classes: int) -> np.ndarray:
    y_i, y_j, lam = label_pair
    out = np.zeros(num_classes)
    out[y_i] += lam
    out[y_j] += 1.0 - lam
    return out


def mix_neighbor_distribution(p_i: NeighborDistribution, p_j: NeighborDistribution, lam: float) -> NeighborDistribution:
    """Pointwise ``lam * p_i + (1 - lam) * p_j`` over the union of supports."""
    if len(p_i) == 0 and len(p_j) == 0:
        raise IsolatedPair("isolated pair")
    support = np.concatenate([p_i.support, p_j.support])
    weights = np.concatenate([lam * p_i.probs, (1.0 - lam) * p_j.probs])
    uniq, inv = np.unique(support, return_inverse=True)
    probs = np.zeros(len(uniq))
    np.add.at(probs, inv, weights)
    keep = probs > 0
    uniq, probs = uniq[keep], probs[keep]
    return NeighborDistribution(uniq, probs / probs.sum())


def sample_ego_neighbors(p_mix: NeighborDistribution, deg_dist: DegreeDistribution | None,
                         rng: np.random.Generator, degree: int | None = None) -> np.ndarray:
    """Draw a target degree and that many distinct neighbors proportional to ``p_mix``.

    ``degree`` overrides the draw from ``deg_dist``; either way it is clamped
    to ``[1, |support|]``.
    """
    if len(p_mix) == 0:
        raise ValueError("empty neighbor distribution")
    d = int(deg_dist.sample(rng)) if degree is None else int(degree)
    d = min(max(d, 1), len(p_mix))
    if d == len(p_mix):
        return p_mix.support.copy()
    return np.sort(rng.choice(p_mix.support, size=d, replace=False, p=p_mix.probs))


@dataclass(frozen=True, eq=False)
class AugmentedGraph:
    """Base graph plus synthetic nodes with ids N..N+m-1.

    Synthetic node ``k`` reads from ``nbr_indices[nbr_indptr[k]:nbr_indptr[k+1]]``
    (base node ids); base adjacency is untouched.
    """

    base: Graph
    x: np.ndarray
    nbr_indptr: np.ndarray
    nbr_indices: np.ndarray
    label_pairs: list
    source_groups: list
    sources: np.ndarray

    @classmethod
    def from_networks(cls, base: Graph, nets) -> "AugmentedGraph":
        nets = list(nets)
        lens = [len(e.neighbors) for e in nets]
        x = np.vstack([e.x_mix for e in nets]) if nets else np.empty((0, base.num_features))
        indices = np.concatenate([e.neighbors for e in nets]).astype(np.int64) if nets else np.empty(0, np.int64)
        return cls(base, x, np.concatenate([[0], np.cumsum(lens)]).astype(np.int64), indices,
                   [e.label_pair for e in nets], [e.source_groups for e in nets],
                   np.array([e.sources for e in nets], dtype=np.int64).reshape(-1, 2))

    @property
    def num_injected(self) -> int:
        return len(self.x)

    @property
    def injected_ids(self) -> np.ndarray:
        return np.arange(self.base.num_nodes, self.base.num_nodes + self.num_injected)

    def neighbors(self, k: int) -> np.ndarray:
        return self.nbr_indices[self.nbr_indptr[k]:self.nbr_indptr[k + 1]]

    @cached_property
    def injected(self) -> list:
        return [MixedEgoNetwork(self.x[k], self.label_pairs[k], self.source_groups[k],
                                self.neighbors(k), tuple(int(v) for v in self.sources[k]))
                for k in range(self.num_injected)]

    def view(self) -> GraphView:
        """Base adjacency plus one read-only row per injected node."""
        n, m = self.base.num_nodes, self.num_injected
        indptr = np.concatenate([self.base.indptr, self.base.indptr[-1] + self.nbr_indptr[1:]])
        indices = np.concatenate([self.base.indices, self.nbr_indices])
        adj = sp.csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n + m, n + m))
        return GraphView(adj, np.vstack([self.base.features, self.x]))


def count_occurrences(pairs, counts=None) -> dict:
    """Per-group occurrences, counting both members of every pair."""
    counts = {} if counts is None else counts
    for p in pairs:
        for g in (p.group_i, p.group_j):
            counts[g] = counts.get(g, 0) + 1
    return counts


def _draw_pairs(graph, groups, eta, beta_alpha, rng):
    """Kinds, counterexamples and ratios for every train node (with fallbacks)."""
    member = groups.membership
    train = graph.train
    m = len(train)
    mu = rng.random(m)
    lam = rng.beta(beta_alpha, beta_alpha, size=m)
    u = rng.random(m)
    kinds, js = [], np.empty(m, dtype=np.int64)
    pools = {}
    for k, i in enumerate(train.tolist()):
        key = member[i]
        first = INTER_DOMAIN if mu[k] >= eta else INTER_CLASS
        order = (first, INTER_CLASS if first == INTER_DOMAIN else INTER_DOMAIN)
        kind, j = IDENTITY, i
        for kd in order:
            if (key, kd) not in pools:
                pools[key, kd] = candidate_pool(groups, key, kd)
            pool = pools[key, kd]
            if len(pool):
                kind, j = kd, int(pool[min(int(u[k] * len(pool)), len(pool) - 1)])
                break
        kinds.append(kind)
        js[k] = j
        if kind == IDENTITY:
            lam[k] = 1.0
    pairs = [MixPair(i, int(j), kd, float(l), member[i], member[int(j)])
             for i, j, kd, l in zip(train.tolist(), js, kinds, lam)]
    return pairs, js, lam


def _sample_mixed_neighbors(graph, ii, jj, lam, target_deg, rng):
    """Vectorized weighted sampling without replacement from each pair's mixed
    neighbor distribution, using exponential race keys (Efraimidis-Spirakis)."""
    deg = graph.degrees
    m = len(ii)

    def sides(nodes, scale):
        cnt = deg[nodes]
        pid = np.repeat(np.arange(m), cnt)
        starts = graph.indptr[nodes]
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        nbr = graph.indices[np.repeat(starts, cnt) + offs]
        w = np.repeat(np.divide(scale, cnt, out=np.zeros(m), where=cnt > 0), cnt)
        return pid, nbr, w

    pa, na, wa = sides(ii, lam)
    pb, nb, wb = sides(jj, 1.0 - lam)
    pid = np.concatenate([pa, pb])
    nbr = np.concatenate([na, nb])
    w = np.concatenate([wa, wb])
    key, inv = np.unique(pid * graph.num_nodes + nbr, return_inverse=True)
    wsum = np.bincount(inv, weights=w, minlength=len(key))
    keep = wsum > 0
    key, wsum = key[keep], wsum[keep]
    pid, nbr = key // graph.num_nodes, key % graph.num_nodes
    support = np.bincount(pid, minlength=m)
    d = np.clip(target_deg, 1, None)
    d = np.minimum(d, support)
    race = rng.exponential(size=len(key)) / wsum
    order = np.lexsort((race, pid))
    starts = np.cumsum(support) - support
    rank = np.arange(len(order)) - np.repeat(starts, support)
    chosen = order[rank < np.repeat(d, support)]
    chosen.sort()  # key is sorted by (pair, node)
    indptr = np.concatenate([[0], np.cumsum(d)]).astype(np.int64)
    return indptr, nbr[chosen]


def build_augmented_graph(graph: Graph, groups: GroupTable, eta: float, beta_alpha: float,
                          rng: np.random.Generator, degree_mode: str = "global",
                          deg_dist: DegreeDistribution | None = None):
    """One mixed ego-network per train node; returns (AugmentedGraph, pairs)."""
    if degree_mode not in ("global", "interpolated"):
        raise ValueError(f"unknown degree mode {degree_mode!r}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if deg_dist is None:
        deg_dist = degree_distribution(graph)
    pairs, js, lam = _draw_pairs(graph, groups, eta, beta_alpha, rng)
    for p in pairs:
        p.check()
    ii = graph.train
    x = lam[:, None] * graph.features[ii] + (1.0 - lam)[:, None] * graph.features[js]
    if degree_mode == "global":
        target = deg_dist.sample(rng, size=len(ii))
    else:
        target = np.rint(lam * graph.degrees[ii] + (1.0 - lam) * graph.degrees[js]).astype(np.int64)
    indptr, indices = _sample_mixed_neighbors(graph, ii, js, lam, target, rng)
    aug = AugmentedGraph(
        graph, x, indptr, indices,
        [(p.group_i[0], p.group_j[0], p.lam) for p in pairs],
        [(p.group_i, p.group_j) for p in pairs],
        np.stack([ii, js], axis=1),
    )
    return aug, pairs


class Independence(NamedTuple):
    deviation: float
    excluded: tuple


def verify_independence(occurrences: dict, num_classes: int = 2, num_sensitive: int = 2) -> Independence:
    """max over (y, s) of |P(Y=y | S=s) - P(Y=y)| from per-group occurrence counts.

    Sensitive values with no occurrences are excluded and listed.
    """
    if any(c < 0 for c in occurrences.values()):
        raise ValueError("negative occurrence count")
    num_classes = max([num_classes] + [k[0] + 1 for k in occurrences])
    num_sensitive = max([num_sensitive] + [k[1] + 1 for k in occurrences])
    table = np.zeros((num_classes, num_sensitive))
    for (y, s), c in occurrences.items():
        table[y, s] += c
    total = table.sum()
    if total <= 0:
        raise ValueError("no occurrences")
    p_y = table.sum(axis=1) / total
    n_s = table.sum(axis=0)
    excluded = tuple(int(s) for s in np.flatnonzero(n_s == 0))
    dev = 0.0
    for s in np.flatnonzero(n_s > 0):
        dev = max(dev, float(np.max(np.abs(table[:, s] / n_s[s] - p_y))))
    return Independence(dev, excluded)
