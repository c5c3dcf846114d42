import itertools
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairgb.metrics import UndefinedMetric, auc, delta_eo, delta_sp, evaluate, f1_acc


def oracle(p, y, s):
    """Direct definitions in exact rational arithmetic; None marks an undefined value."""
    def rate(idx):
        return Fraction(sum(p[i] for i in idx), len(idx)) if idx else None

    n = len(p)
    s0 = [i for i in range(n) if s[i] == 0]
    s1 = [i for i in range(n) if s[i] == 1]
    r0, r1 = rate(s0), rate(s1)
    sp = abs(r0 - r1) if r0 is not None and r1 is not None else None
    t0, t1 = rate([i for i in s0 if y[i] == 1]), rate([i for i in s1 if y[i] == 1])
    eo = abs(t0 - t1) if t0 is not None and t1 is not None else None
    pos = [i for i in range(n) if y[i] == 1]
    neg = [i for i in range(n) if y[i] == 0]
    if pos and neg:
        wins = sum(Fraction(1) if p[a] > p[b] else Fraction(1, 2) if p[a] == p[b] else Fraction(0)
                   for a in pos for b in neg)
        au = wins / (len(pos) * len(neg))
    else:
        au = None
    tp = sum(1 for i in range(n) if p[i] == 1 and y[i] == 1)
    fp = sum(1 for i in range(n) if p[i] == 1 and y[i] == 0)
    fn = sum(1 for i in range(n) if p[i] == 0 and y[i] == 1)
    prec = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    rec = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else Fraction(0)
    acc = Fraction(sum(1 for i in range(n) if p[i] == y[i]), n)
    return sp, eo, au, f1, acc


def _call(f, *a):
    try:
        return f(*a)
    except UndefinedMetric:
        return None


def _check(p, y, s):
    p, y, s = np.array(p), np.array(y), np.array(s)
    sp, eo, au, f1, acc = oracle(p.tolist(), y.tolist(), s.tolist())
    for got, want in ((_call(delta_sp, p, s), sp), (_call(delta_eo, p, y, s), eo), (_call(auc, p, y), au)):
        if want is None:
            assert got is None
        else:
            assert got == float(want), (p, y, s)
    got_f1, got_acc = f1_acc(p, y)
    assert got_f1 == float(f1) and got_acc == float(acc)


def _exhaustive():
    count = 0
    for n in range(1, 6):
        for bits in itertools.product((0, 1), repeat=3 * n):
            _check(bits[:n], bits[n:2 * n], bits[2 * n:])
            count += 1
    # n = 6: every multiset of (pred, label, sensitive) triples, in a shuffled order
    rng = np.random.default_rng(0)
    triples = list(itertools.product((0, 1), repeat=3))
    for combo in itertools.combinations_with_replacement(triples, 6):
        order = rng.permutation(6)
        rows = [combo[k] for k in order]
        _check(*zip(*rows))
        count += 1
    return count


def test_exhaustive_oracle_agreement():
    t = time.perf_counter()
    count = _exhaustive()
    assert count == sum(8 ** n for n in range(1, 6)) + 1716
    assert time.perf_counter() - t < 10.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=30),
       st.randoms(use_true_random=False))
def test_metrics_permutation_invariant(rows, rnd):
    p, y, s = (np.array(c) for c in zip(*rows))
    perm = np.array(rnd.sample(range(len(rows)), len(rows)))
    for f, args in ((delta_sp, (p, s)), (delta_eo, (p, y, s)), (auc, (p, y)), (f1_acc, (p, y))):
        a = _call(f, *args)
        b = _call(f, *(x[perm] for x in args))
        assert a == b


def test_metric_examples():
    assert delta_sp([1, 0, 1, 1], [0, 0, 1, 1]) == 0.5
    assert delta_sp([1, 1, 0, 0], [0, 1, 0, 1]) == 0.0
    assert delta_eo([1, 1, 0, 1], [1, 1, 1, 1], [0, 0, 1, 1]) == 0.5
    assert auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auc([0.5, 0.5], [1, 0]) == 0.5
    assert f1_acc([1, 1, 0, 0], [1, 0, 1, 0]) == (0.5, 0.5)
    with pytest.raises(UndefinedMetric):
        delta_sp([1, 0], [0, 0])
    with pytest.raises(UndefinedMetric):
        auc([0.2, 0.3], [1, 1])


def test_swapping_sensitive_values_preserves_gaps():
    rng = np.random.default_rng(3)
    p, y, s = rng.integers(2, size=(3, 50))
    assert delta_sp(p, s) == delta_sp(p, 1 - s)
    assert delta_eo(p, y, s) == delta_eo(p, y, 1 - s)


def test_auc_invariant_under_monotone_transform():
    rng = np.random.default_rng(4)
    scores = rng.standard_normal(40)
    labels = rng.integers(2, size=40)
    assert auc(scores, labels) == auc(np.exp(3 * scores) + 1, labels)
    assert auc(-scores, labels) == pytest.approx(1 - auc(scores, labels), abs=1e-15)


def test_mask_selects_rows():
    p, s = np.array([1, 0, 1, 1, 1]), np.array([0, 0, 1, 1, 0])
    assert delta_sp(p, s, mask=np.array([0, 1, 2, 3])) == delta_sp(p[:4], s[:4])


def test_evaluate_uses_argmax_and_probabilities():
    logits = np.array([[0.0, 2.0], [1.0, 0.0], [0.0, 3.0], [2.0, 0.0]])
    ev = evaluate(logits, np.array([1, 0, 0, 1]), np.array([0, 0, 1, 1]), np.arange(4))
    assert ev.acc == 0.5 and ev.delta_sp == 0.0
    assert ev.delta_eo == 1.0 and ev.delta_eodds == 1.0
    assert ev.as_percent()["acc"] == 50.0
