"""Attributed graph model, demographic groups and neighbor/degree distributions."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

UNLABELED = -1


class SchemaError(ValueError):
    """Graph data violates a structural requirement."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected attributed graph stored as sorted compressed neighbor lists.

    ``indptr``/``indices`` hold both directions of every edge and never a
    self-loop. Labels and sensitive values use ``UNLABELED`` (-1) for missing.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    sensitive: np.ndarray
    train: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    valid: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    test: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        n = int(self.num_nodes)
        object.__setattr__(self, "num_nodes", n)
        for name, dtype in [
            ("indptr", np.int64), ("indices", np.int64), ("features", np.float64),
            ("labels", np.int64), ("sensitive", np.int64),
            ("train", np.int64), ("valid", np.int64), ("test", np.int64),
        ]:
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))
        self._validate()

    def _validate(self):
        n = self.num_nodes
        if self.indptr.shape != (n + 1,) or self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise SchemaError("indptr does not describe the neighbor array")
        if np.any(np.diff(self.indptr) < 0):
            raise SchemaError("indptr must be non-decreasing")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= n):
            raise SchemaError("neighbor index out of range")
        rows = np.repeat(np.arange(n), np.diff(self.indptr))
        if np.any(rows == self.indices):
            raise SchemaError("self-loops are not stored in a Graph")
        fwd = rows * n + self.indices
        if len(np.unique(fwd)) != len(fwd):
            raise SchemaError("duplicate edge in adjacency")
        if not np.array_equal(np.sort(fwd), np.sort(self.indices * n + rows)):
            raise SchemaError("adjacency is not symmetric")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise SchemaError(f"features must have {n} rows, got shape {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise SchemaError("features contain non-finite entries")
        if self.labels.shape != (n,) or self.sensitive.shape != (n,):
            raise SchemaError("labels and sensitive must have one entry per node")
        masks = [self.train, self.valid, self.test]
        for m in masks:
            if len(m) and (m.min() < 0 or m.max() >= n):
                raise SchemaError("mask index out of range")
            if len(np.unique(m)) != len(m):
                raise SchemaError("mask contains repeated indices")
        allm = np.concatenate(masks)
        if len(np.unique(allm)) != len(allm):
            raise SchemaError("train/valid/test masks overlap")
        if np.any(self.labels[self.train] < 0) or np.any(self.sensitive[self.train] < 0):
            raise SchemaError("every train node needs a label and a sensitive value")

    @classmethod
    def from_edges(cls, num_nodes, edges, features, labels, sensitive, train=(), valid=(), test=()):
        """Build a graph from an (E, 2) array of undirected edges (self-loops dropped)."""
        indptr, indices = csr_from_edges(num_nodes, edges)
        return cls(num_nodes, indptr, indices, features, labels, sensitive,
                   np.asarray(train, dtype=np.int64), np.asarray(valid, dtype=np.int64),
                   np.asarray(test, dtype=np.int64))

    def with_masks(self, train, valid, test) -> "Graph":
        return Graph(self.num_nodes, self.indptr, self.indices, self.features,
                     self.labels, self.sensitive, train, valid, test)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return len(self.indices) // 2

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def num_sensitive(self) -> int:
        return int(self.sensitive.max()) + 1 if self.sensitive.size else 0

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.diff(self.indptr)
        d.setflags(write=False)
        return d

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edge_list(self) -> np.ndarray:
        """Sorted (i, j) pairs with i < j."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        keep = rows < self.indices
        return np.stack([rows[keep], self.indices[keep]], axis=1)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.num_nodes,) * 2)


def csr_from_edges(num_nodes, edges):
    """Symmetrize, deduplicate and sort an edge list into (indptr, indices)."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(e) and (e.min() < 0 or e.max() >= num_nodes):
        raise SchemaError("edge endpoint out of range")
    e = e[e[:, 0] != e[:, 1]]
    both = np.concatenate([e, e[:, ::-1]])
    key = np.unique(both[:, 0] * num_nodes + both[:, 1])
    rows, cols = key // num_nodes, key % num_nodes
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols


@dataclass(frozen=True, eq=False)
class GroupTable:
    """Train nodes partitioned by (label, sensitive) into demographic groups."""

    groups: dict
    num_classes: int
    num_sensitive: int

    @property
    def counts(self) -> dict:
        return {k: len(v) for k, v in self.groups.items()}

    @property
    def num_train(self) -> int:
        return sum(len(v) for v in self.groups.values())

    def get(self, key) -> np.ndarray:
        return self.groups.get(key, np.empty(0, dtype=np.int64))

    @cached_property
    def membership(self) -> dict:
        """Map node index -> (label, sensitive)."""
        return {int(v): k for k, vs in self.groups.items() for v in vs}


def build_group_table(graph: Graph) -> GroupTable:
    train = graph.train
    if len(train) == 0:
        raise SchemaError("empty train set")
    y, s = graph.labels[train], graph.sensitive[train]
    if np.any(y < 0) or np.any(s < 0):
        raise SchemaError("train node without label or sensitive value")
    groups = {}
    for key in sorted(set(zip(y.tolist(), s.tolist()))):
        sel = (y == key[0]) & (s == key[1])
        members = np.sort(train[sel])
        members.setflags(write=False)
        groups[key] = members
    return GroupTable(groups, graph.num_classes, graph.num_sensitive)


@dataclass(frozen=True)
class NeighborDistribution:
    support: np.ndarray
    probs: np.ndarray

    def __len__(self):
        return len(self.support)

    def as_dict(self) -> dict:
        return {int(k): float(p) for k, p in zip(self.support, self.probs)}


def neighbor_distribution(graph: Graph, v: int) -> NeighborDistribution:
    """Uniform distribution over the neighbors of ``v`` (empty if isolated)."""
    nbrs = graph.neighbors(v)
    if len(nbrs) == 0:
        return NeighborDistribution(np.empty(0, dtype=np.int64), np.empty(0))
    return NeighborDistribution(nbrs.copy(), np.full(len(nbrs), 1.0 / len(nbrs)))


@dataclass(frozen=True)
class DegreeDistribution:
    """Empirical multiset of node degrees."""

    degrees: np.ndarray

    @property
    def histogram(self) -> np.ndarray:
        return np.bincount(self.degrees)

    def sample(self, rng: np.random.Generator, size=None):
        return self.degrees[rng.integers(len(self.degrees), size=size)]


def degree_distribution(graph: Graph) -> DegreeDistribution:
    return DegreeDistribution(graph.degrees.copy())
