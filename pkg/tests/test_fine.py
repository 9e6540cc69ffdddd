import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdnets.blocks import CapExceeded, build_blocks
from bdnets.construction import Construction
from bdnets.fine import FineRetractions, shell_enumeration
from bdnets.linf import t_norm, t_truncate
from bdnets.system import build_system


def clamp(y, m):
    return tuple(max(-m, min(m, c)) for c in y)


def compose_oracle(ys, j1, j2):
    """T_{j1+1} o ... o T_{j2} applied to y_{j2}, one local move at a time."""
    y = ys[j2]
    for j in range(j2, j1, -1):
        if y == ys[j]:
            y = clamp(y, max(map(abs, y)) - 1)
    return y


def test_shell_order_examples():
    o = shell_enumeration(1, 3)
    assert o.ys == [(0,), (-1,), (1,), (-2,), (2,), (-3,), (3,)]
    two = shell_enumeration(2, 1)
    assert len([y for y in two.ys if t_norm(y) == 1]) == 8
    assert two.ys[0] == (0, 0)
    with pytest.raises(CapExceeded):
        shell_enumeration(3, 10, cap=100)


@settings(max_examples=25)
@given(st.integers(1, 3), st.integers(0, 3))
def test_shell_order_complete(dim, top):
    o = shell_enumeration(dim, top)
    expected = sorted(itertools.product(range(-top, top + 1), repeat=dim),
                      key=lambda p: (max(map(abs, p)), p))
    assert o.ys == expected


def test_m_value_examples():
    o = shell_enumeration(1, 2)
    assert o.m_value(1, 4) == 0
    assert o.m_value(2, 4) == 1
    with pytest.raises(ValueError):
        o.m_value(4, 4)


@settings(max_examples=10)
@given(st.integers(1, 2), st.integers(1, 3))
def test_m_value_against_composition(dim, top):
    o = shell_enumeration(dim, top)
    for j2 in range(1, len(o)):
        for j1 in range(j2):
            m = o.m_value(j1, j2)
            assert compose_oracle(o.ys, j1, j2) == t_truncate(o.ys[j2], m)
            assert o.norms[j1] - 1 <= m <= o.norms[j1]


def test_E_p0(p0):
    f, b = p0.fine, p0.blocks
    e = f.E(2)
    assert e.size == 72 == len(b.M[2]) - len(b.D[1])
    assert all(len(e.K[j]) == 9 for j in e.J)
    assert e.pairs == sorted(e.pairs)
    assert set(e.x) == set(b.M[2]) - set(b.D[1])
    assert [f.x_point(2, 0, k) for k in range(1, 10)] == e.d
    assert f.E(3).size == 4624


def literal_Psi(f, n, i, x):
    e = f.E(n)
    for l in range(e.size, i, -1):
        if x == e.x[l - 1]:
            j, k = e.pairs[l - 1]
            y = e.order.ys[j]
            x = f.x_point(n, j, k, clamp(y, max(map(abs, y)) - 1))
    return x


def test_Psi_anchor_and_commutation(affine):
    f, b = affine.fine, affine.blocks
    pts = b.M[2]
    e = f.E(2)
    for x in pts:
        assert f.Psi(2, 0, x) == b.psi(2, x)
        assert f.Psi(2, e.size, x) == x
    for i in range(0, e.size + 1, 7):
        for x in pts:
            assert f.Psi(2, i, x) == literal_Psi(f, 2, i, x)
    table = affine.psi_tables(2)
    for a, c in itertools.product(range(len(table)), repeat=2):
        assert (table[a][table[c]] == table[min(a, c)]).all()
    with pytest.raises(ValueError):
        f.Psi(2, e.size + 1, pts[0])


def test_big_M_cases_and_closed_form(p0):
    f = p0.fine
    e = f.E(2)
    first = None
    for i2 in range(1, e.size + 1):
        for i1 in range(1, i2):
            j1, k1 = e.pairs[i1 - 1]
            j2, k2 = e.pairs[i2 - 1]
            want = e.order.m_value(j1, j2) if k2 <= k1 else e.order.m_value(j1 - 1, j2)
            assert f.big_M(2, i1, i2) == want
            assert literal_Psi(f, 2, i1, e.x[i2 - 1]) == f.Psi_closed_form(2, i1, i2)
            if first is None and k2 > k1:
                first = (i1, i2)
    i1, i2 = first
    j2, k2 = e.pairs[i2 - 1]
    out = literal_Psi(f, 2, i1, e.x[i2 - 1])
    assert out == f.x_point(2, j2, k2, t_truncate(e.order.ys[j2], f.big_M(2, i1, i2)))
    with pytest.raises(ValueError):
        f.big_M(2, 3, 3)


def test_G_p0(p0):
    f, b = p0.fine, p0.blocks
    g = f.G(1)
    assert g.size == 4
    assert g.z == [(-3,), (3,), (-4,), (4,)]
    assert set(g.c) == set(b.C[1])
    norms = [t_norm(z) for z in f.G(2).z]
    assert norms == sorted(norms)


def literal_phi(f, n, i, x):
    g = f.G(n)
    for l in range(g.size, i, -1):
        if x == g.c[l - 1]:
            z = g.z[l - 1]
            x = f.blocks.r_D[n][clamp(z, max(map(abs, z)) - 1)]
    return x


def test_phi_intermediate(affine):
    f, b = affine.fine, affine.blocks
    for n in (1, 2):
        g = f.G(n)
        for x in b.D[n]:
            assert f.phi(n, 0, x) == b.phi(n, x)
            for i in range(0, g.size + 1, max(1, g.size // 9)):
                assert f.phi(n, i, x) == literal_phi(f, n, i, x)
                assert f.phi_closed_form(n, i, x) == f.phi(n, i, x)
    with pytest.raises(ValueError):
        f.phi(1, 0, (7, 7, 7))


def test_lambda_one_has_no_C():
    sys = build_system({"stages": [1, 2, 3], "extension": "zero", "lambda_bar": 1})
    f = FineRetractions(build_blocks(sys))
    assert f.G(1).size == 0 and f.G(2).size == 0
    assert f.E(2).size == 9 - 3


def test_local_composition(p0):
    f = p0.fine
    e = f.E(2)
    for i2 in range(1, e.size + 1, 5):
        # psi_{n,i} lives on D_{n-1} plus x_1..x_i
        dom = list(e.d) + e.x[:i2]
        for i1 in range(i2, e.size + 1, 3):
            for x in dom:
                p = f.local_psi(2, i2, x)
                assert f.local_psi(2, i1, p) == p


def test_sandwich(affine):
    f, b = affine.fine, affine.blocks
    for n in (1, 2):
        g, k = f.G(n), b.k(n)
        for i in range(1, g.size + 1):
            zi = t_norm(g.z[i - 1])
            for x in b.D[n]:
                r = t_norm(f.phi(n, i, x)[:k])
                assert zi >= r >= min(t_norm(x[:k]), zi - 1)


def test_wider_chain_E_bijection():
    sys = build_system({"stages": [1, 3], "extension": {"rows": {"1": ["1"], "2": ["-1/2"]}},
                        "lambda_bar": 2})
    con = Construction(sys)
    e = con.fine.E(2)
    assert set(e.x) == set(con.blocks.M[2]) - set(con.blocks.D[1])
    assert len(e.x) == e.size
