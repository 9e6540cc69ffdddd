import itertools
from fractions import Fraction

import numpy as np
import pytest

from bdnets.basis import (
    RetractionalBasis, ambient_sample, extract_net, k_global, perturb, project_rho,
    separated_grid, transfer_basis,
)
from bdnets.construction import Construction
from bdnets.linf import PointMetric, indexed_lipschitz, t_dist, t_norm
from bdnets.system import build_system


def test_k_global():
    assert k_global(2) == 2240
    assert k_global(1) == max(10 * 5 * 5, 25 * 20, 1)


def test_order_p0(p0):
    o = p0.basis.order
    assert o.points[0] == (0, 0, 0)
    assert [s[:4] for s in o.segments] == [("M1", 1, 1, 5), ("C", 1, 6, 9), ("E", 2, 10, 81)]
    assert set(o.points[5:9]) == set(p0.blocks.C[1])
    assert o.boundaries() == [5, 9, 81]
    assert sorted(o.points[1:5]) == o.points[1:5]


def test_varphi_retracts_and_commutes(affine):
    T = affine.tables
    n = len(T)
    for i in range(1, n + 1):
        assert (T[i - 1][:i] == np.arange(i)).all()
        assert T[i - 1].max() < i
    for a, b in itertools.product(range(n), repeat=2):
        assert (T[a][T[b]] == T[min(a, b)]).all()


def test_varphi_segment_formulas(p0):
    basis, b, f = p0.basis, p0.blocks, p0.fine
    pts = basis.order.points
    for i in (6, 8, 9):
        for x in pts[i:]:
            assert basis.varphi(i, x) == f.phi(1, i - 5, b.psi(2, b.phi(2, x)))
    for i in (10, 40, 80):
        for x in pts[i:]:
            assert basis.varphi(i, x) == f.Psi(2, i - 9, b.phi(2, x))
    with pytest.raises(ValueError):
        basis.varphi(0, pts[0])
    with pytest.raises(ValueError):
        basis.varphi(3, (99, 0, 0))


def test_literal_m1_rule(p0_system):
    con = Construction(p0_system, stage=2, m1_rule="literal")
    basis = con.basis
    pts = basis.order.points
    for i in range(1, 6):
        assert all(basis.varphi(i, x) == (0, 0, 0) for x in pts[i:])
    # the zero rule is incompatible with the later segments: some phi_6(x)
    # lands on a nonzero point of M^2 while phi_2(x) = 0
    T = con.tables
    bad = [t for t in range(len(pts)) if T[1][T[5][t]] != T[1][t]]
    assert bad
    x = pts[bad[0]]
    assert basis.varphi(2, basis.varphi(6, x)) != basis.varphi(2, x)


def test_repaired_m1_rule(p0):
    basis, b = p0.basis, p0.blocks
    for i in range(1, 6):
        for x in basis.order.points:
            y = b.phi(1, x)
            want = y if basis.order.index[y] <= i else (0, 0, 0)
            assert basis.varphi(i, x) == want
    with pytest.raises(ValueError):
        RetractionalBasis(p0.fine, 2, m1_rule="other")


def test_global_lipschitz(affine):
    met = affine.metric
    K = k_global(2)
    for row in affine.tables:
        value, _ = indexed_lipschitz(met, row, met)
        assert value <= K


def test_rho():
    p0 = build_system({"stages": [1, 2, 3], "extension": "zero", "lambda_bar": 2})
    con = Construction(p0, stage=2)
    assert all(project_rho(con.blocks, m) == m for m in con.blocks.points)
    sys = build_system({"stages": [1, 2], "extension": "affine", "lambda_bar": 3})
    con = Construction(sys)
    m = (3, 1)
    assert m in con.blocks.M[1]
    assert project_rho(con.blocks, m) == (3, Fraction(3, 2))
    assert all(t_dist(project_rho(con.blocks, x), x) <= 1 for x in con.blocks.points)
    with pytest.raises(ValueError):
        project_rho(con.blocks, (50, 0))


def greedy_oracle(points, a):
    reps = []
    for p in sorted(set(points)):
        if all(t_dist(p, r) > a for r in reps):
            reps.append(p)
    return reps


def test_extract_net(affine):
    eq = extract_net(affine.basis, 2)
    rho = [project_rho(affine.blocks, m) for m in affine.points]
    assert eq.reps == greedy_oracle(rho, 2)
    assert all(t_dist(p, q) > 2 for p, q in itertools.combinations(eq.reps, 2))
    covered = [p for cl in eq.clusters for p in cl]
    assert sorted(covered) == sorted(set(rho))
    for k, cl in enumerate(eq.clusters):
        assert all(t_dist(p, eq.reps[k]) <= 2 for p in cl)
    with pytest.raises(ValueError):
        extract_net(affine.basis, 1)


def test_single_cluster(p0):
    eq = extract_net(p0.basis, 100)
    assert len(eq.reps) == 1
    with pytest.raises(ValueError):
        perturb(eq)   # 81 points cannot fit a 27-point grid


def test_grid():
    g = separated_grid(3)
    assert len(g) == 27 and g[0] == (0, 0, 0)
    assert all(t_norm(p) <= Fraction(3, 4) for p in g)
    assert all(t_dist(p, q) >= Fraction(1, 2) for p, q in itertools.combinations(g, 2))


def test_perturb_and_transfer(affine):
    eq = perturb(extract_net(affine.basis, 2))
    a = eq.a
    net = eq.net
    assert len(set(net)) == len(net)
    assert all(t_dist(p, q) >= a / 4 for p, q in itertools.combinations(net, 2))
    assert all(t_dist(m, u) <= a + 1 + 3 * a / 8 for m, u in zip(eq.points, net))
    dom, img = PointMetric(eq.points), PointMetric(net)
    ident = np.arange(len(net))
    assert eq.lip_forward == indexed_lipschitz(dom, ident, img)[0]
    assert eq.lip_backward == indexed_lipschitz(img, ident, dom)[0]
    T = affine.tables
    moved = transfer_basis(T)
    D = eq.distortion
    for i, row in enumerate(moved, start=1):
        # prefix set of the transferred map is mu(M^i)
        assert {net[t] for t in set(row.tolist())} == set(net[:i])
        lip_m = indexed_lipschitz(dom, T[i - 1], dom)[0]
        assert indexed_lipschitz(img, row, img)[0] <= D * lip_m


def test_ambient_sample(p0):
    sample = ambient_sample(p0.blocks, 2)
    assert len(sample) == 17**2
    assert all(t_norm(x) <= 4 for x in sample)
