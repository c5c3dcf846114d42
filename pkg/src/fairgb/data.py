"""Dataset loading, feature standardization, splits and a synthetic biased graph."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .graph import UNLABELED, Graph, SchemaError

GROUP_ORDER = ((0, 0), (0, 1), (1, 0), (1, 1))

# (nodes, undirected edges, attributes) of the public benchmark releases
BENCHMARK_STATS = {
    "german": (1000, 22242, 27),
    "bail": (18876, 321308, 18),
    "credit": (30000, 152377, 13),
}
BENCHMARK_SENSITIVE = {"german": "gender", "bail": "race", "credit": "age"}


class ParseError(SchemaError):
    pass


@dataclass(frozen=True)
class SplitPolicy:
    """Either explicit index files or stratified random fractions."""

    train_fraction: float = 0.5
    valid_fraction: float = 0.25
    seed: int = 0
    stratify: str = "label"
    index_files: dict | None = None

    def __post_init__(self):
        if self.train_fraction < 0 or self.valid_fraction < 0 or self.train_fraction + self.valid_fraction > 1:
            raise ValueError("split fractions must be non-negative and sum to at most 1")
        if self.stratify not in ("label", "group"):
            raise ValueError("stratify must be 'label' or 'group'")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    nodes_path: Path
    edges_path: Path
    label_column: str = "label"
    sensitive_column: str = "sensitive"
    id_column: str = "node_id"
    include_sensitive_in_features: bool = True
    standardize: bool = True
    split: SplitPolicy = field(default_factory=SplitPolicy)

    @classmethod
    def from_dir(cls, name, data_dir, **kw) -> "DatasetSpec":
        """Spec for ``<data_dir>/nodes.csv`` + ``edges.csv``, picking up ``*.idx`` split files."""
        d = Path(data_dir)
        if "split" not in kw:
            files = {k: d / f"{k}.idx" for k in ("train", "valid", "test")}
            if all(p.exists() for p in files.values()):
                kw["split"] = SplitPolicy(index_files=files)
        return cls(name, d / "nodes.csv", d / "edges.csv", **kw)


class DatasetStats(NamedTuple):
    num_nodes: int
    num_edges: int
    num_features: int
    self_loops: int


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path.name}: missing header row")
    return [c.strip() for c in rows[0]], rows[1:]


def _number(cell, path, line, col, kind=float):
    try:
        v = kind(cell)
    except ValueError:
        raise ParseError(f"{Path(path).name}: row {line}, column {col!r}: non-numeric value {cell!r}") from None
    if kind is float and not np.isfinite(v):
        raise ParseError(f"{Path(path).name}: row {line}, column {col!r}: non-finite value {cell!r}")
    return v


def read_dataset(spec: DatasetSpec) -> tuple[Graph, DatasetStats]:
    header, rows = _read_csv(spec.nodes_path)
    for col in (spec.id_column, spec.label_column, spec.sensitive_column):
        if col not in header:
            raise ParseError(f"{spec.nodes_path.name}: missing column {col!r}")
    idx = {c: i for i, c in enumerate(header)}
    feat_cols = [c for c in header if c not in (spec.id_column, spec.label_column, spec.sensitive_column)]
    if spec.include_sensitive_in_features:
        feat_cols.append(spec.sensitive_column)

    n = len(rows)
    ids = {}
    x = np.empty((n, len(feat_cols)))
    y = np.full(n, UNLABELED, dtype=np.int64)
    s = np.full(n, UNLABELED, dtype=np.int64)
    for r, row in enumerate(rows):
        line = r + 2
        if len(row) != len(header):
            raise ParseError(f"{spec.nodes_path.name}: row {line} has {len(row)} cells, expected {len(header)}")
        nid = _number(row[idx[spec.id_column]], spec.nodes_path, line, spec.id_column, int)
        if nid in ids:
            raise ParseError(f"{spec.nodes_path.name}: row {line}: duplicate node id {nid}")
        ids[nid] = r
        for j, c in enumerate(feat_cols):
            x[r, j] = _number(row[idx[c]], spec.nodes_path, line, c)
        for arr, c in ((y, spec.label_column), (s, spec.sensitive_column)):
            cell = row[idx[c]].strip()
            if cell:
                arr[r] = int(_number(cell, spec.nodes_path, line, c))
                if arr[r] < 0:
                    arr[r] = UNLABELED

    eheader, erows = _read_csv(spec.edges_path)
    if len(eheader) < 2:
        raise ParseError(f"{spec.edges_path.name}: header needs src,dst columns")
    edges = np.empty((len(erows), 2), dtype=np.int64)
    seen = set()
    self_loops = 0
    for r, row in enumerate(erows):
        line = r + 2
        if len(row) < 2:
            raise ParseError(f"{spec.edges_path.name}: row {line} has fewer than 2 cells")
        ends = []
        for k in range(2):
            nid = _number(row[k], spec.edges_path, line, eheader[k], int)
            if nid not in ids:
                raise ParseError(f"{spec.edges_path.name}: row {line}: dangling endpoint {nid}")
            ends.append(ids[nid])
        if (ends[0], ends[1]) in seen:
            raise ParseError(f"{spec.edges_path.name}: row {line}: duplicate edge ({row[0]}, {row[1]})")
        seen.add((ends[0], ends[1]))
        self_loops += ends[0] == ends[1]
        edges[r] = ends

    if spec.standardize:
        x = standardize_features(x)
    graph = Graph.from_edges(n, edges, x, y, s)
    graph = split_nodes(graph, spec.split, ids=ids)
    stats = DatasetStats(n, graph.num_edges + self_loops, x.shape[1], self_loops)
    return graph, stats


def load_dataset(spec: DatasetSpec) -> Graph:
    return read_dataset(spec)[0]


def standardize_features(x: np.ndarray) -> np.ndarray:
    """Column z-score with population std; constant columns become zero."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    centered = x - mu
    out = np.zeros_like(centered)
    ok = sd > 1e-12 * np.maximum(1.0, np.abs(mu))
    out[:, ok] = centered[:, ok] / sd[ok]
    return out


def _read_index_file(path, ids=None):
    with open(path, encoding="utf-8") as fh:
        vals = [int(line) for line in fh if line.strip()]
    if ids is None:
        return np.asarray(vals, dtype=np.int64)
    try:
        return np.asarray([ids[v] for v in vals], dtype=np.int64)
    except KeyError as e:
        raise SchemaError(f"{Path(path).name}: unknown node id {e.args[0]}") from None


def split_nodes(graph: Graph, policy: SplitPolicy, ids=None) -> Graph:
    """Return ``graph`` with train/valid/test masks set according to ``policy``."""
    if policy.index_files:
        masks = [_read_index_file(policy.index_files[k], ids) for k in ("train", "valid", "test")]
        return graph.with_masks(*masks)
    labeled = np.flatnonzero(graph.labels >= 0)
    if policy.stratify == "group":
        labeled = labeled[graph.sensitive[labeled] >= 0]
        strata = graph.labels[labeled] * (graph.num_sensitive + 1) + graph.sensitive[labeled]
    else:
        strata = graph.labels[labeled]
    rng = np.random.default_rng(policy.seed)
    train, valid, test = [], [], []
    for key in np.unique(strata):
        members = rng.permutation(labeled[strata == key])
        n_tr = int(round(policy.train_fraction * len(members)))
        n_va = int(round(policy.valid_fraction * len(members)))
        n_va = min(n_va, len(members) - n_tr)
        train.append(members[:n_tr])
        valid.append(members[n_tr:n_tr + n_va])
        test.append(members[n_tr + n_va:])
    masks = [np.sort(np.concatenate(m)) if m else np.empty(0, dtype=np.int64) for m in (train, valid, test)]
    return graph.with_masks(*masks)


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-class, two-group block graph with label and sensitive signals.

    Group counts are given per (label, sensitive) in ``GROUP_ORDER``. The
    train counts carry the bias (and, by default, a label imbalance); valid/test
    counts default to balanced groups
    so that label base rates do not contribute to the measured parity gap.
    """

    train_counts: tuple = (150, 50, 100, 300)
    valid_counts: tuple = (75, 75, 75, 75)
    test_counts: tuple = (250, 250, 250, 250)
    p_intra: float = 0.01
    p_inter: float = 0.004
    num_features: int = 8
    class_signal: float = 0.6
    sensitive_signal: float = 2.0
    seed: int = 0

    def __post_init__(self):
        for c in (self.train_counts, self.valid_counts, self.test_counts):
            if len(c) != 4 or any(int(k) < 0 for k in c):
                raise ValueError("group counts need four non-negative entries")
        if not (0 <= self.p_intra <= 1 and 0 <= self.p_inter <= 1):
            raise ValueError("edge probabilities must lie in [0, 1]")
        if self.num_features < 2:
            raise ValueError("need at least two feature dimensions")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        for k in ("train_counts", "valid_counts", "test_counts"):
            if k in d:
                d[k] = tuple(int(v) for v in d[k])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**d)


def _block_edges(blocks, p_intra, p_inter, rng, chunk=512):
    n = len(blocks)
    out = []
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        u = rng.random((len(rows), n))
        same = blocks[rows, None] == blocks[None, :]
        hit = u < np.where(same, p_intra, p_inter)
        hit &= np.arange(n)[None, :] > rows[:, None]
        r, c = np.nonzero(hit)
        out.append(np.stack([rows[r], c], axis=1))
    return np.concatenate(out) if out else np.empty((0, 2), dtype=np.int64)


def generate_synthetic(spec: SyntheticSpec) -> Graph:
    rng = np.random.default_rng(spec.seed)
    y, s, split = [], [], []
    for part, counts in enumerate((spec.train_counts, spec.valid_counts, spec.test_counts)):
        for (gy, gs), c in zip(GROUP_ORDER, counts):
            y += [gy] * int(c)
            s += [gs] * int(c)
            split += [part] * int(c)
    y, s, split = (np.asarray(a, dtype=np.int64) for a in (y, s, split))
    n = len(y)
    x = rng.standard_normal((n, spec.num_features))
    x[:, 0] += spec.class_signal * (2 * y - 1)
    x[:, 1] += spec.sensitive_signal * (2 * s - 1)
    edges = _block_edges(2 * y + s, spec.p_intra, spec.p_inter, rng)
    graph = Graph.from_edges(n, edges, x, y, s)
    return graph.with_masks(*(np.flatnonzero(split == k) for k in range(3)))
