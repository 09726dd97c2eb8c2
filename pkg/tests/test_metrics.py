from fractions import Fraction

import numpy as np
import pytest

from caesar.metrics import MetricError, auc, evaluate, f1_at, ks, recall_at_precision


def _auc_pairs(s, y):
    pos = [a for a, t in zip(s, y) if t == 1]
    neg = [b for b, t in zip(s, y) if t == 0]
    wins = sum(Fraction(1) if a > b else Fraction(1, 2) if a == b else 0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


def _ks_brute(s, y):
    pos = [a for a, t in zip(s, y) if t == 1]
    neg = [b for b, t in zip(s, y) if t == 0]
    best = Fraction(0)
    for t in set(s):
        fp = Fraction(sum(a <= t for a in pos), len(pos))
        fn = Fraction(sum(b <= t for b in neg), len(neg))
        best = max(best, abs(fp - fn))
    return best


def _f1_brute(s, y, th=0.5):
    tp = sum(1 for a, t in zip(s, y) if a >= th and t == 1)
    fp = sum(1 for a, t in zip(s, y) if a >= th and t == 0)
    fn = sum(1 for a, t in zip(s, y) if a < th and t == 1)
    return Fraction(0) if tp == 0 else Fraction(2 * tp, 2 * tp + fp + fn)


def _recall_brute(s, y, p=Fraction(9, 10)):
    best = Fraction(0)
    npos = sum(y)
    for t in set(s):
        sel = [lab for a, lab in zip(s, y) if a >= t]
        tp = sum(sel)
        if Fraction(tp, len(sel)) >= p:
            best = max(best, Fraction(tp, npos))
    return best


def test_examples():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert ks([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc([0.5] * 4, [1, 0, 1, 0]) == 0.5
    assert ks([0.5] * 4, [1, 0, 1, 0]) == 0.0
    s, y = [0.9, 0.8, 0.7, 0.4, 0.3, 0.1], [1, 1, 0, 1, 0, 0]
    assert _auc_pairs(s, y) == Fraction(8, 9)
    assert auc(s, y) == pytest.approx(8 / 9, abs=1e-12)


def test_errors():
    with pytest.raises(MetricError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(MetricError):
        auc([0.1, 0.2], [1, 0, 1])
    with pytest.raises(MetricError):
        ks([0.1, 0.2], [2, 0])


def test_scores_are_clipped():
    assert auc([1.3, 1.1, -0.2], [1, 0, 0]) == pytest.approx(0.75)


def test_against_brute_force_oracles():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(3, 40))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        # coarse grid forces ties
        s = rng.integers(0, 11, n) / 10
        sl, yl = s.tolist(), y.tolist()
        assert auc(s, y) == pytest.approx(float(_auc_pairs(sl, yl)), abs=1e-12)
        assert ks(s, y) == pytest.approx(float(_ks_brute(sl, yl)), abs=1e-12)
        assert f1_at(s, y) == pytest.approx(float(_f1_brute(sl, yl)), abs=1e-12)
        assert recall_at_precision(s, y) == pytest.approx(float(_recall_brute(sl, yl)), abs=1e-12)


def test_recall_zero_when_unreachable():
    assert recall_at_precision([0.9, 0.8, 0.1], [0, 1, 0]) == 0.0


def test_evaluate_keys():
    out = evaluate([0.9, 0.2, 0.6, 0.4], [1, 0, 1, 0])
    assert set(out) == {"auc", "ks", "f1", "recall_at_0.9_precision"}
    assert out["f1"] == 1.0
