"""Full-batch training for vanilla, RW, OS, FairGB and its two ablations."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import cal, cnm
from .encoders import EncoderConfig, GraphView, backward, forward, init_params
from .graph import Graph, build_group_table, degree_distribution
from .metrics import Evaluation, UndefinedMetric, auc, evaluate, f1_acc
from .nn import adam_step, check_finite, softmax_cross_entropy

log = logging.getLogger(__name__)

METHODS = ("vanilla", "rw", "os", "fairgb", "fairgb_wo_cal", "fairgb_wo_cnm")
FAIRGB_FAMILY = ("fairgb", "fairgb_wo_cal", "fairgb_wo_cnm")
SELECTIONS = ("post_warmup", "best_val", "last")
METRICS = ("auc", "f1", "acc", "delta_sp", "delta_eo", "delta_eodds")
# shorter schedule for the desk-scale synthetic graph (it converges far sooner)
SYNTHETIC_SCHEDULE = {"epochs": 400, "warmup": 150, "lr": 0.01}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    method: str = "fairgb"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    epochs: int = 1000
    warmup: int = 400
    eta: float = 0.5
    beta_alpha: float = 1.0
    lr: float = 1e-3
    weight_decay: float = 1e-5
    seed: int = 0
    repeats: int = 10
    selection: str = "post_warmup"
    degree_mode: str = "global"
    weight_floor: float = cal.DEFAULT_FLOOR
    weight_cap: float = cal.DEFAULT_CAP
    std: str = "population"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0 <= self.warmup <= self.epochs:
            raise ConfigError("need 0 <= warmup <= epochs")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("eta must lie in [0, 1]")
        if self.beta_alpha <= 0:
            raise ConfigError("beta_alpha must be positive")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {SELECTIONS}")
        if self.degree_mode not in ("global", "interpolated"):
            raise ConfigError("degree_mode must be 'global' or 'interpolated'")
        if self.std not in ("population", "sample"):
            raise ConfigError("std must be 'population' or 'sample'")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        enc = d.pop("encoder", {})
        if isinstance(enc, str):
            enc = {"kind": enc}
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(encoder=EncoderConfig(**enc), **d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RepeatResult:
    seed: int
    test: Evaluation
    valid_score: float
    best_epoch: int
    losses: list
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "valid_score": self.valid_score,
            "test": self.test.as_percent(),
            "losses": self.losses,
            "history": self.history,
        }


def _key(g) -> str:
    return f"{g[0]},{g[1]}"


def _selection_score(logits, graph: Graph) -> float:
    """(AUC + F1) / 2 on the validation nodes."""
    m = graph.valid
    preds = logits[m].argmax(axis=1)
    y = graph.labels[m]
    f1, acc = f1_acc(preds, y)
    try:
        a = auc(logits[m, 1] - logits[m, 0], y)
    except UndefinedMetric:
        a = acc
    return (a + f1) / 2.0


def check_preconditions(graph: Graph, config: TrainConfig, groups=None):
    groups = build_group_table(graph) if groups is None else groups
    if len(graph.valid) == 0 or len(graph.test) == 0:
        raise ConfigError("valid and test masks must be non-empty")
    if graph.num_classes != 2:
        raise ConfigError("evaluation assumes binary labels")
    t = graph.test
    for y in (0, 1):
        if len(np.unique(graph.sensitive[t][graph.labels[t] == y])) < 2:
            raise ConfigError(f"test nodes with label {y} must cover both sensitive groups")
    sens = {k[1] for k in groups.groups}
    if config.method in FAIRGB_FAMILY + ("rw", "os") and len(sens) < 2:
        raise ConfigError(f"method {config.method} needs at least two sensitive groups in the train set")
    return groups


def train(graph: Graph, config: TrainConfig, seed: int | None = None):
    """Train one model; returns (best ModelState, RepeatResult)."""
    seed = config.seed if seed is None else seed
    groups = check_preconditions(graph, config)
    init_rng, drop_rng, aug_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    enc = config.encoder
    num_classes = graph.num_classes
    state = init_params(enc, graph.num_features, num_classes, init_rng)
    base = GraphView.of(graph)
    n = graph.num_nodes
    train_idx = graph.train
    y_train = graph.labels[train_idx]
    member = groups.membership
    train_keys = [member[int(v)] for v in train_idx]
    deg_dist = degree_distribution(graph)

    rw_w = None
    if config.method == "rw":
        w = cal.rw_weights(groups)
        rw_w = np.array([w[int(v)] for v in train_idx])
    os_view = os_rows = os_y = None
    if config.method == "os":
        aug = cal.oversample(graph, groups, aug_rng)
        os_view = aug.view()
        os_rows = np.concatenate([train_idx, aug.injected_ids])
        os_y = np.concatenate([y_train, [e.label_pair[0] for e in aug.injected]]).astype(np.int64)

    def ce_step(view, rows, y, weights=None):
        logits, cache = forward(view, enc, state.params, drop_rng)
        check_finite(logits, "logits")
        loss_rows, g = softmax_cross_entropy(logits[rows], y)
        if weights is None:
            weights = np.ones(len(rows))
        grad = np.zeros_like(logits)
        grad[rows] = weights[:, None] * g / len(rows)
        return float(np.sum(weights * loss_rows) / len(rows)), grad, cache, logits

    best = (-np.inf, 0, state.copy())
    losses, history = [], []
    for t in range(1, config.epochs + 1):
        rebalancing = config.method in FAIRGB_FAMILY and t > config.warmup
        record = None
        if config.method == "rw":
            loss, grad, cache, _ = ce_step(base, train_idx, y_train, rw_w)
        elif config.method == "os":
            loss, grad, cache, _ = ce_step(os_view, os_rows, os_y)
        elif not rebalancing:
            loss, grad, cache, _ = ce_step(base, train_idx, y_train)
        elif config.method == "fairgb_wo_cnm":
            logits, cache = forward(base, enc, state.params, drop_rng)
            check_finite(logits, "logits")
            r = cal.contributions(logits[train_idx], y_train)
            ledger = cal.accumulate(train_keys, r, epoch=t)
            weights = cal.group_weights(ledger, config.weight_floor, config.weight_cap)
            w = weights.lookup(train_keys)
            loss_rows, g = softmax_cross_entropy(logits[train_idx], y_train)
            loss = float(np.sum(w * loss_rows) / len(train_idx))
            grad = np.zeros_like(logits)
            grad[train_idx] = w[:, None] * g / len(train_idx)
            record = _record(t, None, ledger, weights)
        else:
            aug, pairs = cnm.build_augmented_graph(graph, groups, config.eta, config.beta_alpha, aug_rng,
                                                   config.degree_mode, deg_dist)
            view = aug.view()
            logits, cache = forward(view, enc, state.params, drop_rng)
            check_finite(logits, "logits")
            mixed = logits[n:]
            y_i = np.array([p.group_i[0] for p in pairs])
            y_j = np.array([p.group_j[0] for p in pairs])
            ledger = cal.accumulate_pairs(pairs, cal.contributions(mixed, y_i),
                                          cal.contributions(mixed, y_j), epoch=t)
            if config.method == "fairgb":
                weights = cal.group_weights(ledger, config.weight_floor, config.weight_cap)
            else:
                weights = cal.GroupWeights({k: 1.0 for k in ledger.R})
            loss, g = cal.cal_loss(mixed, pairs, weights)
            grad = np.zeros_like(logits)
            grad[n:] = g
            record = _record(t, cnm.count_occurrences(pairs), ledger, weights)

        grads = backward(enc, state.params, cache, grad)
        adam_step(state, grads, lr=config.lr, weight_decay=config.weight_decay)
        losses.append(loss)
        if record is not None:
            history.append(record)

        eval_logits, _ = forward(base, enc, state.params)
        check_finite(eval_logits, "logits")
        score = _selection_score(eval_logits, graph)
        if _candidate(config, t) and (score > best[0] or config.selection == "last"):
            best = (score, t, state.copy())

    score, best_epoch, best_state = best
    logits, _ = forward(base, enc, best_state.params)
    test = evaluate(logits, graph.labels, graph.sensitive, graph.test)
    return best_state, RepeatResult(seed, test, float(score), best_epoch, losses, history)


def _candidate(config: TrainConfig, t: int) -> bool:
    if config.selection == "post_warmup" and config.method in FAIRGB_FAMILY and config.warmup < config.epochs:
        return t > config.warmup
    return True


def _record(epoch, occurrences, ledger, weights):
    rec = {
        "epoch": epoch,
        "ledger": {_key(k): v for k, v in sorted(ledger.R.items())},
        "weights": {_key(k): v for k, v in sorted(weights.w.items())},
        "floored": sorted(_key(k) for k in weights.floored),
        "capped": sorted(_key(k) for k in weights.capped),
    }
    if occurrences is not None:
        rec["occurrences"] = {_key(k): v for k, v in sorted(occurrences.items())}
    return rec


def aggregate(values, std: str = "population") -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=0 if std == "population" else 1))


@dataclass
class RunReport:
    config: dict
    dataset: str
    repeats: list

    def aggregate(self) -> dict:
        out = {}
        for m in METRICS:
            vals = [r["test"][m] for r in self.repeats]
            mean, sd = aggregate(vals, self.config.get("std", "population"))
            out[m] = {"mean": round(mean, 2), "std": round(sd, 2)}
        return out

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "config": self.config,
                "aggregate": self.aggregate(), "repeats": self.repeats}


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FAIRGB_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(graph: Graph, config: TrainConfig, dataset: str = "") -> RunReport:
    """``config.repeats`` independent runs with seeds seed, seed+1, ..."""
    check_preconditions(graph, config)
    seeds = [config.seed + k for k in range(config.repeats)]

    def one(seed):
        try:
            _, res = train(graph, config, seed)
        except Exception as e:
            raise RuntimeError(f"repeat with seed {seed} failed: {e}") from e
        log.info("seed %d: best epoch %d, test %s", seed, res.best_epoch, res.test)
        return res.to_dict()

    workers = min(_threads(), len(seeds))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    return RunReport(config.to_dict(), dataset, results)


def with_overrides(config: TrainConfig, **kw) -> TrainConfig:
    enc_kw = {k: kw.pop(k) for k in list(kw) if k in {f.name for f in fields(EncoderConfig)}}
    if enc_kw:
        kw["encoder"] = replace(config.encoder, **enc_kw)
    return replace(config, **kw)
