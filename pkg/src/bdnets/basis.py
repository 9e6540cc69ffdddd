"""Global one-point order on M, the retractional basis, and the net N.

Everything here works on the realized set M_V for a chosen stage V <= N_max.
Retractions are tabulated as integer arrays over the indices of M_V so the
commutation and Lipschitz suites become array lookups.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from bdnets.blocks import BlockChain, Point
from bdnets.fine import FineRetractions
from bdnets.linf import PointMetric, indexed_lipschitz, t_dist, t_norm

GRID_VALUES = (Fraction(-3, 4), Fraction(0), Fraction(3, 4))


def k_global(lam: int) -> int:
    """Uniform Lipschitz bound for the global retractions."""
    return max(
        (2 * lam**2 + 4 * lam + 4) * (lam**2 + 2 * lam + 2) * (3 * lam + 2),
        (3 * lam + 2) ** 2 * (3 * lam**2 + 6 * lam + 11),
        lam**2,
    )


@dataclass
class GlobalOrder:
    stage: int
    points: list[Point]                       # I^-1(i) = points[i-1]
    index: dict[Point, int]
    # (kind, n, first, last) with kind in {"M1", "C", "E"}; inclusive 1-based bounds
    segments: list[tuple[str, int, int, int]]

    def __len__(self):
        return len(self.points)

    def segment(self, i: int) -> tuple[str, int, int, int]:
        for seg in self.segments:
            if seg[2] <= i <= seg[3]:
                return seg
        raise ValueError(f"index {i} out of range 1..{len(self.points)}")

    def boundaries(self) -> list[int]:
        return [seg[3] for seg in self.segments]


def global_index(fine: FineRetractions, stage: int | None = None) -> GlobalOrder:
    b = fine.blocks
    stage = stage or b.n_max
    origin = (0,) * b.sys.dim
    m1 = sorted(b.M[1], key=lambda p: (p != origin, p))
    if m1[0] != origin:
        raise AssertionError("the origin is missing from M_1")
    points = list(m1)
    segments = [("M1", 1, 1, len(points))]
    for n in range(1, stage):
        c = fine.G(n).c
        segments.append(("C", n, len(points) + 1, len(points) + len(c)))
        points += c
        if len(points) != len(b.D[n]):
            raise AssertionError(f"#D_{n} mismatch in the global order")
        x = fine.E(n + 1).x
        segments.append(("E", n + 1, len(points) + 1, len(points) + len(x)))
        points += x
        if len(points) != len(b.M[n + 1]):
            raise AssertionError(f"#M_{n + 1} mismatch in the global order")
    index = {p: i for i, p in enumerate(points, start=1)}
    if len(index) != len(points):
        raise AssertionError("global order is not injective")
    return GlobalOrder(stage, points, index, segments)


M1_RULES = ("repaired", "literal")


class RetractionalBasis:
    """Global retractions varphi_i on M_V.

    On the M_1 segment the ``literal`` rule sends every x outside M^i to 0.
    That breaks commutation as soon as a later retraction lands on a nonzero
    point of M^i, so the default ``repaired`` rule routes through phi_1
    first: varphi_i(x) = phi_1(x) if I(phi_1(x)) <= i, else 0.
    """

    def __init__(self, fine: FineRetractions, stage: int | None = None, m1_rule: str = "repaired"):
        if m1_rule not in M1_RULES:
            raise ValueError(f"m1_rule must be one of {M1_RULES}, got {m1_rule!r}")
        self.fine = fine
        self.blocks: BlockChain = fine.blocks
        self.order = global_index(fine, stage)
        self.origin = self.order.points[0]
        self.m1_rule = m1_rule

    def __len__(self):
        return len(self.order)

    def varphi(self, i: int, x: Point) -> Point:
        o = self.order
        kind, n, first, _ = o.segment(i)
        pos = o.index.get(x)
        if pos is None:
            raise ValueError(f"{x} is not a realized point of M_{o.stage}")
        if pos <= i:
            return x
        b, f = self.blocks, self.fine
        if kind == "M1":
            if self.m1_rule == "literal":
                return self.origin
            y = b.phi(1, x)
            return y if o.index[y] <= i else self.origin
        if kind == "C":
            # i - #M_n; phi_{n+1} is the identity once n+1 reaches N_max
            return f.phi(n, i - first + 1, b.psi(n + 1, b.phi(n + 1, x)))
        return f.Psi(n, i - first + 1, b.phi(n, x))

    def table(self, i: int) -> np.ndarray:
        idx = self.order.index
        return np.array([idx[self.varphi(i, x)] - 1 for x in self.order.points], dtype=np.int64)

    def tables(self) -> np.ndarray:
        return np.stack([self.table(i) for i in range(1, len(self) + 1)])


def project_rho(blocks: BlockChain, m: Point) -> tuple:
    """rho(m) = i_{n(m)} r_{n(m)}(m)."""
    n = blocks.birth.get(m)
    if n is None:
        raise ValueError(f"{m} is not a realized point of M")
    return blocks.sys.extend_tuple(n, m[: blocks.k(n)])


@dataclass
class NetEquivalence:
    a: Fraction
    b: Fraction
    points: list[Point]                  # the domain M_V, in global order
    rho: list[tuple]                     # rho(points[t])
    reps: list[tuple]                    # tilde m_k
    clusters: list[list[tuple]]          # N_k, subsets of rho(M)
    cluster_of: list[int]                # k with rho(points[t]) in N_k
    slot: list[int]                      # n with points[t] = m^n_k (1-based)
    grid: list[tuple]
    net: list[tuple] = field(default_factory=list)   # mu(points[t])
    lip_forward: Fraction | None = None
    lip_backward: Fraction | None = None

    @property
    def distortion(self) -> Fraction:
        return self.lip_forward * self.lip_backward

    @property
    def displacement_bound(self) -> Fraction:
        return self.a + 1 + 3 * self.a / 8

    @property
    def density_bound(self) -> Fraction:
        return self.b + 3 * self.a / 8


def separated_grid(dim: int) -> list[tuple]:
    """{-3/4, 0, 3/4}^dim ordered by (norm, lex); pairwise >= 3/4 apart, norms <= 3/4."""
    pts = list(itertools.product(GRID_VALUES, repeat=dim))
    pts.sort(key=lambda p: (t_norm(p), p))
    return pts


def extract_net(basis: RetractionalBasis, a: Fraction | int = 2) -> NetEquivalence:
    """Greedy (a, a)-net of rho(M) in lexicographic order, with its clusters."""
    a = Fraction(a)
    if a <= 1:
        raise ValueError(f"a must exceed 1, got {a}")
    blocks = basis.blocks
    points = basis.order.points
    rho = [project_rho(blocks, m) for m in points]
    remaining = sorted(set(rho))
    reps, clusters = [], []
    while remaining:
        rep = remaining[0]
        inside = [p for p in remaining if t_dist(p, rep) <= a]
        remaining = [p for p in remaining if t_dist(p, rep) > a]
        reps.append(rep)
        clusters.append(inside)
    which = {p: k for k, cl in enumerate(clusters) for p in cl}
    cluster_of = [which[r] for r in rho]
    slot = [0] * len(points)
    for k in range(len(clusters)):
        members = sorted((t for t in range(len(points)) if cluster_of[t] == k), key=lambda t: points[t])
        for pos, t in enumerate(members, start=1):
            slot[t] = pos
    lam = blocks.sys.lambda_bar
    return NetEquivalence(a, a + 2 * lam + 3, points, rho, reps, clusters, cluster_of, slot,
                          separated_grid(blocks.sys.dim))


def perturb(equiv: NetEquivalence, domain: PointMetric | None = None) -> NetEquivalence:
    """Complete the equivalence with mu(m^n_k) = rep_k + (a/2) x_n and its constants."""
    grid = equiv.grid
    need = max(equiv.slot, default=0)
    if need > len(grid):
        raise ValueError(f"a cluster needs {need} separated grid points; only {len(grid)} exist")
    half = equiv.a / 2
    equiv.net = [
        tuple(r + half * g for r, g in zip(equiv.reps[k], grid[n - 1]))
        for k, n in zip(equiv.cluster_of, equiv.slot)
    ]
    if len(set(equiv.net)) != len(equiv.net):
        raise AssertionError("mu is not injective")
    dom = domain or PointMetric(equiv.points)
    img = PointMetric(equiv.net)
    ident = np.arange(len(equiv.points))
    equiv.lip_forward, _ = indexed_lipschitz(dom, ident, img)
    equiv.lip_backward, _ = indexed_lipschitz(img, ident, dom)
    return equiv


def transfer_basis(tables: np.ndarray) -> np.ndarray:
    """mu o phi_i o mu^-1 as index tables over N.

    N is indexed exactly like M (point t of N is mu of point t of M), so
    conjugation leaves the index tables unchanged; only the metric changes.
    """
    return tables.copy()


def ambient_sample(blocks: BlockChain, stage: int, step: Fraction = Fraction(1, 2)) -> list[tuple]:
    """Grid of the realized ball i_V(s_V B): images of step-spaced vectors over Gamma_V."""
    sys = blocks.sys
    s = sys.s(stage)
    ticks = int(2 * s / step) + 1
    values = [Fraction(-s) + step * t for t in range(ticks)]
    k = blocks.k(stage)
    return [sys.extend_tuple(stage, w) for w in itertools.product(values, repeat=k)]
