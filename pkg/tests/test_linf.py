import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdnets.linf import (
    PointMetric, QVec, StageChain, entire, format_rational, indexed_lipschitz, integer_ball,
    integer_shell, join, lipschitz_constant, parse_rational, quantize, restrict, truncate,
)

rationals = st.fractions(min_value=-50, max_value=50, max_denominator=12)
vectors = st.lists(rationals, min_size=1, max_size=4).map(QVec.of)


def test_entire_matches_trunc_toward_zero():
    for r in (Fraction(7, 4), Fraction(-9, 4), Fraction(1, 2), Fraction(-1, 2), Fraction(-3), Fraction(0)):
        assert entire(r) == math.trunc(r)


@given(rationals)
def test_entire_oracle(r):
    assert entire(r) == math.trunc(r)


def test_parse_rational_is_exact():
    assert parse_rational("3/6") == Fraction(1, 2)
    assert parse_rational(" -7 ") == -7
    assert parse_rational(5) == 5
    for bad in (0.5, "0.5", "1e3", "", True):
        with pytest.raises(ValueError):
            parse_rational(bad)


@given(rationals)
def test_format_parse_roundtrip(r):
    assert parse_rational(format_rational(r)) == r


def test_quantize_examples():
    assert quantize(QVec.of([Fraction(7, 4), Fraction(-9, 4), Fraction(1, 2)])) == QVec.of([1, -2, 0])
    assert quantize(QVec.of([0, 0])) == QVec.of([0, 0])
    assert quantize(QVec.of([-5, 3])) == QVec.of([-5, 3])


@given(vectors)
def test_quantize_properties(v):
    q = quantize(v)
    assert quantize(q) == q
    for a, c in zip(q.values, v.values):
        assert a.denominator == 1
        assert abs(a) <= abs(c)
        assert a * c >= 0


def test_quantize_is_not_nonexpansive():
    # documented counterexample: [1] - [9/10] = 1 > 1/10
    v, w = QVec.of([1]), QVec.of([Fraction(9, 10)])
    assert (quantize(v) - quantize(w)).sup_norm > (v - w).sup_norm


def test_truncate_examples():
    assert truncate(QVec.of([3, -5]), 4) == QVec.of([3, -4])
    assert truncate(QVec.of([1, -2]), 4) == QVec.of([1, -2])
    assert truncate(QVec.of([Fraction(-7, 2)]), 2) == QVec.of([-2])
    with pytest.raises(ValueError):
        truncate(QVec.of([1]), -1)


@given(vectors, st.fractions(min_value=0, max_value=20, max_denominator=6))
def test_truncate_bound(v, s):
    t = truncate(v, s)
    assert t.sup_norm <= min(s, v.sup_norm)
    for a, c in zip(t.values, v.values):
        if abs(c) <= s:
            assert a == c


@given(st.lists(st.tuples(rationals, rationals), min_size=1, max_size=4),
       st.fractions(min_value=0, max_value=20, max_denominator=6))
def test_truncate_and_restrict_nonexpansive(pairs, s):
    v = QVec.of([p[0] for p in pairs])
    w = QVec.of([p[1] for p in pairs])
    d = (v - w).sup_norm
    assert (truncate(v, s) - truncate(w, s)).sup_norm <= d
    chain = StageChain(tuple(range(1, len(pairs) + 1)))
    for n in range(1, chain.n_max + 1):
        assert (restrict(v, n, chain) - restrict(w, n, chain)).sup_norm <= d


def test_restrict_examples():
    chain = StageChain((1, 2, 3))
    assert restrict(QVec.of([2, 5, -1]), 1, chain) == QVec.of([2])
    v = QVec.of([2, 5, -1])
    assert restrict(v, 3, chain) == v
    assert restrict(QVec.of([]), 2, chain).sup_norm == 0
    with pytest.raises(ValueError):
        restrict(v, 4, chain)


def test_join_examples():
    x = QVec.of([2], support=[0])
    y = QVec.of([-3], support=[1])
    assert join(x, y) == QVec.of([2, -3])
    empty = QVec.of([])
    assert join(x, empty) == x
    assert join(empty, empty).sup_norm == 0
    with pytest.raises(ValueError):
        join(x, QVec.of([1], support=[0]))


@given(vectors, st.lists(rationals, max_size=3))
def test_join_norm(x, tail):
    y = QVec.of(tail, support=range(len(x.support), len(x.support) + len(tail)))
    j = join(x, y)
    assert j.sup_norm == max(x.sup_norm, y.sup_norm)
    assert all(j[i] == x[i] for i in x.support)


def test_qvec_off_support_reads_zero():
    v = QVec.of([3], support=[2])
    assert v[0] == 0 and v[2] == 3
    assert v.dense(4) == (0, 0, 3, 0)
    assert v.equals(QVec.of([0, 0, 3]))


def test_stage_chain():
    chain = StageChain((1, 2, 4))
    assert list(chain.delta(1)) == [0]
    assert list(chain.delta(3)) == [2, 3]
    assert [chain.stage_of(i) for i in range(4)] == [1, 2, 3, 3]
    # every index in exactly one increment
    cover = [i for n in range(1, 4) for i in chain.delta(n)]
    assert sorted(cover) == list(range(4))
    assert chain.size(7) == 4
    for bad in ((), (0, 1), (2, 2), (3, 1)):
        with pytest.raises(ValueError):
            StageChain(bad)


def test_lipschitz_examples():
    pts = [(0,), (1,), (3,), (7,)]
    assert lipschitz_constant([(p, p) for p in pts]) == 1
    assert lipschitz_constant([(p, (5,)) for p in pts]) == 0
    table = [((0,), (0,)), ((1,), (2,)), ((3,), (2,))]
    assert lipschitz_constant(table) == 2
    assert lipschitz_constant([((0,), (4,))]) == 0
    with pytest.raises(ValueError):
        lipschitz_constant([((0,), (0,)), ((0,), (1,))])


def _brute(pts, imgs):
    best = Fraction(0)
    for a, b in itertools.combinations(range(len(pts)), 2):
        dd = max(abs(x - y) for x, y in zip(pts[a], pts[b]))
        di = max(abs(x - y) for x, y in zip(imgs[a], imgs[b]))
        best = max(best, Fraction(di) / dd)
    return best


@settings(max_examples=60)
@given(st.sets(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=2, max_size=15),
       st.integers(0, 10**6), st.integers(1, 5))
def test_lipschitz_routes_agree(pts, seed, chunks):
    pts = sorted(pts)
    rng = np.random.default_rng(seed)
    images = rng.integers(0, len(pts), size=len(pts))
    imgs = [pts[k] for k in images]
    value, pair = indexed_lipschitz(PointMetric(pts), images)
    assert value == _brute(pts, imgs)
    assert lipschitz_constant(list(zip(pts, imgs)), chunks=chunks) == value
    a, b = pair
    assert Fraction(max(abs(x - y) for x, y in zip(imgs[a], imgs[b]))) / \
        max(abs(x - y) for x, y in zip(pts[a], pts[b])) == value


def test_point_metric_rational():
    pm = PointMetric([(Fraction(1, 2), 0), (Fraction(-1, 3), 1)])
    assert pm.d(0, 1) == Fraction(1)
    assert pm.d(0, 0) == 0
    with pytest.raises(OverflowError):
        PointMetric([(2**70,)])


def test_integer_ball_and_shell_counts():
    for dim in (1, 2, 3):
        for r in (0, 1, 2):
            ball = integer_ball(dim, r)
            assert len(ball) == (2 * r + 1) ** dim
            assert ball == sorted(ball)
        shell = integer_shell(dim, 1, 2)
        assert len(shell) == 5**dim - 3**dim
        assert all(max(map(abs, p)) == 2 for p in shell)
        assert shell == sorted(shell)
