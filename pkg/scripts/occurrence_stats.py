"""Per-group mixup occurrence counts and their deviation from label/sensitive independence.

For each eta, the augmented graph is regenerated for a number of epochs (no
training involved, since pair selection does not depend on the model) and the
per-epoch counts of both pair members are accumulated.

    python scripts/occurrence_stats.py --epochs 200 --counts 200,50,50,200
"""
from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from fairgb.cnm import build_augmented_graph, count_occurrences, verify_independence
from fairgb.data import GROUP_ORDER, SyntheticSpec, generate_synthetic
from fairgb.graph import build_group_table


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--counts", default="200,50,50,200", help="train counts for groups (0,0),(0,1),(1,0),(1,1)")
    p.add_argument("--etas", default="0,0.25,0.5,0.75,1")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    counts = tuple(int(c) for c in args.counts.split(","))
    graph = generate_synthetic(SyntheticSpec(train_counts=counts))
    groups = build_group_table(graph)
    out = csv.writer(sys.stdout)
    out.writerow(["eta"] + [f"occ_{y}{s}" for y, s in GROUP_ORDER] + ["max_deviation"])
    for eta in (float(e) for e in args.etas.split(",")):
        rng = np.random.default_rng(args.seed)
        occ = {}
        for _ in range(args.epochs):
            _, pairs = build_augmented_graph(graph, groups, eta, 1.0, rng)
            count_occurrences(pairs, occ)
        dev = verify_independence(occ).deviation
        out.writerow([eta] + [occ.get(g, 0) for g in GROUP_ORDER] + [f"{dev:.4f}"])


if __name__ == "__main__":
    main()
