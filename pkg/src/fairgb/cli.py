"""Command line entry point: run one or more methods on a dataset and write reports."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

import yaml

from .data import DatasetSpec, ParseError, SyntheticSpec, generate_synthetic, load_dataset
from .encoders import EncoderConfig
from .graph import SchemaError
from .train import METHODS, SYNTHETIC_SCHEDULE, ConfigError, TrainConfig, run_experiment

ETA_GRID = tuple(round(0.1 * k, 1) for k in range(11))
TABLE_COLUMNS = (("AUC", "auc"), ("F1", "f1"), ("ACC", "acc"), ("dSP", "delta_sp"), ("dEO", "delta_eo"))

# CLI flag -> TrainConfig / EncoderConfig field
_FLAG_FIELDS = {
    "eta": "eta", "beta_alpha": "beta_alpha", "epochs": "epochs", "warmup": "warmup", "lr": "lr",
    "weight_decay": "weight_decay", "seed": "seed", "repeats": "repeats", "degree_mode": "degree_mode",
    "selection": "selection", "std": "std",
}


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _eta_list(text: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eta list {text!r}") from None
    return tuple(vals)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairgb", description="Fair GNN training with group re-balancing.")
    p.add_argument("--dataset", default="synthetic", help="'synthetic' or a dataset name (german, bail, credit, ...)")
    p.add_argument("--data-dir", type=Path, help="directory with nodes.csv, edges.csv and optional *.idx splits")
    p.add_argument("--spec", type=Path, help="YAML/JSON synthetic graph spec")
    p.add_argument("--config", type=Path, help="YAML/JSON training config (flags override its keys)")
    p.add_argument("--method", help=f"comma-separated subset of {', '.join(METHODS)}")
    p.add_argument("--encoder", choices=("gcn", "sage", "gin"))
    p.add_argument("--eta", type=float)
    p.add_argument("--beta-alpha", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--hidden", type=int, help="hidden and embedding width")
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--selection", choices=("post_warmup", "best_val", "last"))
    p.add_argument("--std", choices=("population", "sample"))
    p.add_argument("--degree-mode", choices=("global", "interpolated"))
    p.add_argument("--include-sensitive-in-features", type=_bool, default=True, metavar="{true|false}")
    p.add_argument("--eta-sweep", nargs="?", const=ETA_GRID, type=_eta_list, metavar="ETAS",
                   help="run every eta in the list (default 0, 0.1, ..., 1)")
    p.add_argument("--output", type=Path, help="directory for report.json, table.csv, occurrences.csv")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _read_mapping(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return data


def resolve_config(args, method: str) -> TrainConfig:
    """Defaults < config file < flags."""
    base = dict(SYNTHETIC_SCHEDULE) if args.dataset == "synthetic" else {}
    if args.config:
        base.update(_read_mapping(args.config))
    enc = base.pop("encoder", {})
    enc = {"kind": enc} if isinstance(enc, str) else dict(enc)
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag)
        if v is not None:
            base[name] = v
    if args.encoder:
        enc["kind"] = args.encoder
    if args.hidden:
        enc["hidden_dim"] = enc["embed_dim"] = args.hidden
    base["method"] = method
    unknown = set(enc) - {f.name for f in fields(EncoderConfig)}
    if unknown:
        raise ConfigError(f"unknown encoder keys: {sorted(unknown)}")
    base["encoder"] = enc
    return TrainConfig.from_dict(base)


def load_graph(args):
    if args.dataset == "synthetic":
        spec = SyntheticSpec.from_dict(_read_mapping(args.spec)) if args.spec else SyntheticSpec()
        return generate_synthetic(spec)
    data_dir = args.data_dir or Path("data") / args.dataset
    spec = DatasetSpec.from_dir(args.dataset, data_dir,
                                include_sensitive_in_features=args.include_sensitive_in_features)
    return load_dataset(spec)


def _cell(agg, key):
    return f"{agg[key]['mean']:.2f}±{agg[key]['std']:.2f}"


def format_row(dataset, method, eta, agg) -> str:
    cells = "  ".join(f"{name} {_cell(agg, key)}" for name, key in TABLE_COLUMNS)
    return f"{dataset:<10} {method:<14} eta={eta:<4g} {cells}"


def write_outputs(out: Path, reports):
    out.mkdir(parents=True, exist_ok=True)
    payload = {"runs": [r.to_dict() for r in reports]}
    (out / "report.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    with open(out / "table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "eta"] + [name for name, _ in TABLE_COLUMNS])
        for r in reports:
            agg = r.aggregate()
            w.writerow([r.dataset, r.config["method"], r.config["eta"]] + [_cell(agg, k) for _, k in TABLE_COLUMNS])
    rows = []
    for r in reports:
        for rep in r.repeats:
            for rec in rep["history"]:
                for g, c in rec.get("occurrences", {}).items():
                    y, s = g.split(",")
                    rows.append([r.config["method"], r.config["eta"], rep["seed"], rec["epoch"], y, s, c])
    if rows:
        with open(out / "occurrences.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "eta", "seed", "epoch", "y", "s", "count"])
            w.writerows(rows)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    methods = (args.method or "fairgb").split(",")
    bad = [m for m in methods if m not in METHODS]
    if bad:
        parser.error(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    try:
        graph = load_graph(args)
        etas = args.eta_sweep or (None,)
        configs = []
        for m in methods:
            for eta in etas:
                cfg = resolve_config(args, m)
                configs.append(cfg if eta is None else TrainConfig.from_dict({**asdict(cfg), "eta": eta}))
        reports = []
        for cfg in configs:
            rep = run_experiment(graph, cfg, args.dataset)
            print(format_row(args.dataset, cfg.method, cfg.eta, rep.aggregate()), flush=True)
            reports.append(rep)
    except FileNotFoundError as e:
        print(f"fairgb: error: missing file {e.filename or e}", file=sys.stderr)
        return 2
    except (ConfigError, SchemaError, ParseError, yaml.YAMLError, TypeError) as e:
        print(f"fairgb: error: {e}", file=sys.stderr)
        return 2
    if args.output:
        write_outputs(args.output, reports)
    return 0


if __name__ == "__main__":
    sys.exit(main())
