"""Message-passing encoders (GCN, SAGE-mean, GIN) and the linear classifier head.

Every encoder works on a :class:`GraphView`: a feature matrix plus a sparse
aggregation structure whose row ``i`` lists the nodes that ``i`` reads from.
For an ordinary graph that is the symmetric adjacency; augmented graphs add
rows for synthetic nodes that read from base nodes but are never read by them.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .nn import (
    ContractError, ModelState, add_bias, dropout_backward, dropout_forward, glorot,
    matmul, relu, relu_backward,
)

KINDS = ("gcn", "sage", "gin")


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "gcn"
    layers: int = 2
    hidden_dim: int = 16
    embed_dim: int = 16
    dropout: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown encoder {self.kind!r}; expected one of {KINDS}")
        if self.layers < 1 or self.hidden_dim < 1 or self.embed_dim < 1:
            raise ContractError("layers and dims must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ContractError("dropout must be in [0, 1)")

    def dims(self, in_dim: int) -> list[tuple[int, int]]:
        widths = [in_dim] + [self.hidden_dim] * (self.layers - 1) + [self.embed_dim]
        return list(zip(widths[:-1], widths[1:]))


class GraphView:
    """Features plus a (possibly directed) aggregation structure."""

    def __init__(self, adjacency: sp.csr_matrix, features: np.ndarray):
        n = features.shape[0]
        if adjacency.shape != (n, n):
            raise ContractError(f"adjacency {adjacency.shape} vs {n} feature rows")
        self.adjacency = sp.csr_matrix(adjacency, dtype=np.float64)
        self.adjacency.sort_indices()
        self.features = features

    @classmethod
    def of(cls, graph) -> "GraphView":
        return cls(graph.adjacency, graph.features)

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @cached_property
    def row_degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    @cached_property
    def gcn_operator(self) -> sp.csr_matrix:
        """D^-1/2 (A + I) D^-1/2 with d_i = |row i| + 1."""
        inv_sqrt = 1.0 / np.sqrt(self.row_degrees + 1.0)
        a_hat = (self.adjacency + sp.identity(self.num_nodes, format="csr")).tocsr()
        a_hat.sort_indices()
        rows = np.repeat(np.arange(self.num_nodes), np.diff(a_hat.indptr))
        a_hat.data = inv_sqrt[rows] * inv_sqrt[a_hat.indices]
        return a_hat

    @cached_property
    def mean_operator(self) -> sp.csr_matrix:
        deg = self.row_degrees
        scale = np.divide(1.0, deg, out=np.zeros(len(deg)), where=deg > 0)
        return sp.csr_matrix(sp.diags(scale) @ self.adjacency)

    @cached_property
    def sum_operator(self) -> sp.csr_matrix:
        # GIN with a fixed epsilon of zero: self + sum of neighbors
        return (self.adjacency + sp.identity(self.num_nodes, format="csr")).tocsr()

    def transpose(self, name: str) -> sp.csr_matrix:
        cache = self.__dict__.setdefault("_transposes", {})
        if name not in cache:
            cache[name] = getattr(self, name).T.tocsr()
        return cache[name]


def init_params(config: EncoderConfig, in_dim: int, num_classes: int,
                rng: np.random.Generator) -> ModelState:
    params = {}
    for l, (fi, fo) in enumerate(config.dims(in_dim)):
        if config.kind == "gcn":
            params[f"enc{l}.W"] = glorot(fi, fo, rng)
            params[f"enc{l}.b"] = np.zeros(fo)
        elif config.kind == "sage":
            params[f"enc{l}.W"] = glorot(2 * fi, fo, rng)
            params[f"enc{l}.b"] = np.zeros(fo)
        else:
            params[f"enc{l}.W1"] = glorot(fi, fo, rng)
            params[f"enc{l}.b1"] = np.zeros(fo)
            params[f"enc{l}.W2"] = glorot(fo, fo, rng)
            params[f"enc{l}.b2"] = np.zeros(fo)
    params["head.W"] = glorot(config.embed_dim, num_classes, rng)
    params["head.b"] = np.zeros(num_classes)
    return ModelState(params)


def _layer_forward(kind, view, h, params, l):
    p = f"enc{l}."
    if kind == "gcn":
        hw = matmul(h, params[p + "W"])
        return add_bias(view.gcn_operator @ hw, params[p + "b"]), (h,)
    if kind == "sage":
        cat = np.hstack([h, view.mean_operator @ h])
        return add_bias(matmul(cat, params[p + "W"]), params[p + "b"]), (cat,)
    agg = view.sum_operator @ h
    pre = add_bias(matmul(agg, params[p + "W1"]), params[p + "b1"])
    mid = relu(pre)
    return add_bias(matmul(mid, params[p + "W2"]), params[p + "b2"]), (agg, pre, mid)


def _layer_backward(kind, view, cache, grad, params, l, grads):
    p = f"enc{l}."
    if kind == "gcn":
        (h,) = cache
        grads[p + "b"] = grad.sum(axis=0)
        g_hw = view.transpose("gcn_operator") @ grad
        grads[p + "W"] = h.T @ g_hw
        return g_hw @ params[p + "W"].T
    if kind == "sage":
        (cat,) = cache
        grads[p + "b"] = grad.sum(axis=0)
        grads[p + "W"] = cat.T @ grad
        g_cat = grad @ params[p + "W"].T
        fi = cat.shape[1] // 2
        return g_cat[:, :fi] + view.transpose("mean_operator") @ g_cat[:, fi:]
    agg, pre, mid = cache
    grads[p + "b2"] = grad.sum(axis=0)
    grads[p + "W2"] = mid.T @ grad
    g_pre = relu_backward(pre, grad @ params[p + "W2"].T)
    grads[p + "b1"] = g_pre.sum(axis=0)
    grads[p + "W1"] = agg.T @ g_pre
    return view.transpose("sum_operator") @ (g_pre @ params[p + "W1"].T)


def encode(view: GraphView, config: EncoderConfig, params: dict, rng=None):
    """Node embeddings Z (N x embed_dim). Dropout is active only when ``rng`` is given."""
    h = view.features
    caches = []
    for l in range(config.layers):
        out, cache = _layer_forward(config.kind, view, h, params, l)
        act = relu(out)
        if l < config.layers - 1:
            h, mask = dropout_forward(act, config.dropout, rng)
        else:
            h, mask = act, None
        caches.append((cache, out, mask))
    return h, caches


def encode_backward(view: GraphView, config: EncoderConfig, params: dict, caches, grad_z):
    grads = {}
    g = grad_z
    for l in reversed(range(config.layers)):
        cache, out, mask = caches[l]
        g = relu_backward(out, dropout_backward(g, mask))
        g = _layer_backward(config.kind, view, cache, g, params, l, grads)
    return grads


def classify(z: np.ndarray, params: dict) -> np.ndarray:
    return add_bias(matmul(z, params["head.W"]), params["head.b"])


@dataclass
class ForwardCache:
    view: GraphView
    caches: list
    z: np.ndarray
    z_in: np.ndarray
    head_mask: np.ndarray | None


def forward(view: GraphView, config: EncoderConfig, params: dict, rng=None):
    """Logits for every node of ``view``; returns (logits, cache for :func:`backward`)."""
    z, caches = encode(view, config, params, rng)
    z_in, mask = dropout_forward(z, config.dropout, rng)
    return classify(z_in, params), ForwardCache(view, caches, z, z_in, mask)


def backward(config: EncoderConfig, params: dict, cache: ForwardCache, grad_logits):
    """Parameter gradients given d(loss)/d(logits) for every row of the view."""
    grads = {"head.W": cache.z_in.T @ grad_logits, "head.b": grad_logits.sum(axis=0)}
    g_z = dropout_backward(grad_logits @ params["head.W"].T, cache.head_mask)
    grads.update(encode_backward(cache.view, config, params, cache.caches, g_z))
    return grads
