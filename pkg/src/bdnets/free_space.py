"""Exact Lipschitz-free norms over a finite pointed metric space.

The norm of a molecule is its optimal transport cost, with the base point
absorbing the imbalance. The transport problem is solved by successive
shortest paths on integer-scaled data, and every solve returns a dual
certificate: a function that is 1-Lipschitz on the support plus base point,
vanishes at the base point and pairs with the molecule to the same value.
A dense simplex on the Lipschitz-function LP is kept as an independent
cross-check for small supports.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from bdnets.linf import PointMetric

INF = float("inf")


class FiniteMetric:
    """Pointed metric space on indexed points with exact sup-norm distances."""

    def __init__(self, points: Sequence[Sequence], base: int = 0):
        self.pm = points if isinstance(points, PointMetric) else PointMetric(points)
        if not 0 <= base < len(self.pm):
            raise ValueError("base point index out of range")
        self.base = base

    def __len__(self):
        return len(self.pm)

    @property
    def points(self):
        return self.pm.points

    def d(self, a: int, b: int) -> Fraction:
        return self.pm.d(a, b)

    def check_axioms(self) -> bool:
        dist = self.pm.dist
        n = len(dist)
        if (np.diag(dist) != 0).any() or (dist != dist.T).any():
            return False
        off = dist + np.eye(n, dtype=np.int64)
        if (off <= 0).any():
            return False
        for k in range(n):
            if (dist > dist[:, k:k + 1] + dist[k:k + 1, :]).any():
                return False
        return True


class Molecule(dict):
    """Finitely supported point -> coefficient map; the base point is dropped."""

    @classmethod
    def of(cls, coeffs: Mapping[int, object], base: int = 0) -> "Molecule":
        m = cls()
        for x, a in coeffs.items():
            a = Fraction(a)
            if x != base and a != 0:
                m[x] = m.get(x, Fraction(0)) + a
        return cls({x: a for x, a in m.items() if a != 0})

    def scaled(self, q) -> "Molecule":
        return Molecule.of({x: q * a for x, a in self.items()})

    def __add__(self, other: "Molecule") -> "Molecule":
        out = dict(self)
        for x, a in other.items():
            out[x] = out.get(x, Fraction(0)) + a
        return Molecule.of(out)

    def __sub__(self, other: "Molecule") -> "Molecule":
        return self + other.scaled(-1)

    def key(self) -> tuple:
        return tuple(sorted(self.items()))


@dataclass
class NormResult:
    value: Fraction        # optimal transport cost
    dual_value: Fraction   # pairing of the certificate with the molecule
    potential: dict[int, Fraction]   # 1-Lipschitz, zero at the base point
    flow: list[tuple[int, int, Fraction]]
    certified: bool


def free_norm(metric: FiniteMetric, m: Mapping[int, object]) -> NormResult:
    for x in m:
        if not 0 <= x < len(metric):
            raise ValueError(f"molecule uses point {x} outside the metric space")
    m = Molecule.of(m, metric.base)
    if not m:
        return NormResult(Fraction(0), Fraction(0), {metric.base: Fraction(0)}, [], True)
    coef_scale = math.lcm(*(a.denominator for a in m.values()))
    mass = {x: int(a * coef_scale) for x, a in m.items()}
    mass[metric.base] = -sum(mass.values())
    sources = [x for x in sorted(mass) if mass[x] > 0]
    sinks = [x for x in sorted(mass) if mass[x] < 0]
    dist = metric.pm.dist
    cost = [[int(dist[s, t]) for t in sinks] for s in sources]
    flow = _transport(
        [mass[s] for s in sources], [-mass[t] for t in sinks], cost
    )
    total = sum(f * cost[i][j] for (i, j), f in flow.items())
    pot = _potentials(len(sources), len(sinks), cost, flow)
    # f(node) = -pi(node); c-transform over the sinks makes it globally 1-Lipschitz
    f_sink = [-pot[len(sources) + j] for j in range(len(sinks))]
    support = sorted(set(m) | {metric.base})
    raw = {x: min(f_sink[j] + int(dist[x, t]) for j, t in enumerate(sinks)) for x in support}
    shift = raw[metric.base]
    F = {x: v - shift for x, v in raw.items()}
    dual = sum(mass[x] * F[x] for x in support if x in mass)
    lipschitz_ok = all(
        abs(F[x] - F[y]) <= int(dist[x, y]) for i, x in enumerate(support) for y in support[i + 1:]
    )
    unit = coef_scale * metric.pm.scale
    return NormResult(
        value=Fraction(total, unit),
        dual_value=Fraction(dual, unit),
        potential={x: Fraction(v, metric.pm.scale) for x, v in F.items()},
        flow=[(sources[i], sinks[j], Fraction(f, coef_scale)) for (i, j), f in sorted(flow.items())],
        certified=lipschitz_ok and dual == total and F[metric.base] == 0,
    )


def _transport(supply: list[int], demand: list[int], cost: list[list[int]]) -> dict:
    """Min-cost transport by successive shortest paths (integer data, exact)."""
    ns, nt = len(supply), len(demand)
    left, need = list(supply), list(demand)
    flow: dict[tuple[int, int], int] = {}
    while any(left):
        # Bellman-Ford from every source with remaining supply; nodes 0..ns-1, ns..ns+nt-1
        dist = [0 if left[i] > 0 else INF for i in range(ns)] + [INF] * nt
        pred: list = [None] * (ns + nt)
        for _ in range(ns + nt):
            changed = False
            for i in range(ns):
                if dist[i] == INF:
                    continue
                for j in range(nt):
                    nd = dist[i] + cost[i][j]
                    if nd < dist[ns + j]:
                        dist[ns + j], pred[ns + j], changed = nd, i, True
            for (i, j), f in flow.items():
                if f > 0 and dist[ns + j] != INF and dist[ns + j] - cost[i][j] < dist[i]:
                    dist[i], pred[i], changed = dist[ns + j] - cost[i][j], ns + j, True
            if not changed:
                break
        end = min((j for j in range(nt) if need[j] > 0 and dist[ns + j] != INF),
                  key=lambda j: (dist[ns + j], j))
        path, node = [], ns + end
        while pred[node] is not None:
            path.append((pred[node], node))
            node = pred[node]
        start = node
        amount = min(left[start], need[end])
        for u, v in path:
            if u >= ns:   # reverse edge sink u -> source v cancels flow
                amount = min(amount, flow[(v, u - ns)])
        for u, v in path:
            if u < ns:
                flow[(u, v - ns)] = flow.get((u, v - ns), 0) + amount
            else:
                flow[(v, u - ns)] -= amount
        left[start] -= amount
        need[end] -= amount
    return {k: f for k, f in flow.items() if f}


def _potentials(ns: int, nt: int, cost, flow) -> list[int]:
    # shortest distances from a virtual root on the final residual graph
    pi = [0] * (ns + nt)
    for _ in range(ns + nt + 1):
        changed = False
        for i in range(ns):
            for j in range(nt):
                if pi[i] + cost[i][j] < pi[ns + j]:
                    pi[ns + j], changed = pi[i] + cost[i][j], True
        for (i, j), f in flow.items():
            if f > 0 and pi[ns + j] - cost[i][j] < pi[i]:
                pi[i], changed = pi[ns + j] - cost[i][j], True
        if not changed:
            return pi
    raise AssertionError("negative cycle in the residual graph: transport is not optimal")


# -- independent dual LP -----------------------------------------------------


def simplex_max(c: Sequence[Fraction], A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Fraction:
    """max c.x subject to A x <= b, x >= 0, with b >= 0. Dense tableau, Bland's rule."""
    m, n = len(A), len(c)
    if any(v < 0 for v in b):
        raise ValueError("simplex_max needs a feasible origin (b >= 0)")
    T = [list(map(Fraction, A[r])) + [Fraction(int(r == s)) for s in range(m)] + [Fraction(b[r])]
         for r in range(m)]
    z = [-Fraction(v) for v in c] + [Fraction(0)] * (m + 1)
    basis = [n + r for r in range(m)]
    while True:
        col = next((j for j in range(n + m) if z[j] < 0), None)
        if col is None:
            return z[-1]
        best = None
        for r in range(m):
            if T[r][col] > 0:
                ratio = T[r][-1] / T[r][col]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                    best = (ratio, r)
        if best is None:
            raise ValueError("LP is unbounded")
        r = best[1]
        piv = T[r][col]
        T[r] = [v / piv for v in T[r]]
        for rr in range(m):
            if rr != r and T[rr][col] != 0:
                f = T[rr][col]
                T[rr] = [v - f * w for v, w in zip(T[rr], T[r])]
        if z[col] != 0:
            f = z[col]
            z = [v - f * w for v, w in zip(z, T[r])]
        basis[r] = col


def dual_lp_norm(metric: FiniteMetric, m: Mapping[int, object]) -> Fraction:
    """max sum a_x u(x) over u 1-Lipschitz on supp(m) + base with u(base) = 0."""
    m = Molecule.of(m, metric.base)
    xs = sorted(m)
    if not xs:
        return Fraction(0)
    k = len(xs)
    c = [m[x] for x in xs] + [-m[x] for x in xs]
    A, b = [], []
    for p, x in enumerate(xs):
        for q, y in enumerate(xs):
            if p != q:
                row = [Fraction(0)] * (2 * k)
                row[p], row[q], row[k + p], row[k + q] = 1, -1, -1, 1
                A.append(row)
                b.append(metric.d(x, y))
        for sign in (1, -1):
            row = [Fraction(0)] * (2 * k)
            row[p], row[k + p] = sign, -sign
            A.append(row)
            b.append(metric.d(x, metric.base))
    return simplex_max(c, A, b)


# -- linearized maps -----------------------------------------------------------


def pushforward(T: Callable[[int], int] | Sequence[int] | Mapping[int, int], m: Mapping[int, object], base: int = 0) -> Molecule:
    """sum a_x delta_{T(x)} with merged coefficients; T must fix the base point."""
    f = T if callable(T) else T.__getitem__
    if int(f(base)) != base:
        raise ValueError("the map moves the base point")
    out: dict[int, Fraction] = {}
    for x, a in m.items():
        y = int(f(x))
        out[y] = out.get(y, Fraction(0)) + Fraction(a)
    return Molecule.of(out, base)


def sample_molecules(n_points: int, seed: int, elementary: int = 20, pairs: int = 20,
                     combos: int = 20, base: int = 0) -> list[Molecule]:
    """Elementary molecules, differences of sampled pairs, and seeded random combinations."""
    rng = random.Random(seed)
    others = [x for x in range(n_points) if x != base]
    out = [Molecule.of({x: 1}, base) for x in others[:elementary]]
    for _ in range(pairs):
        x, y = rng.sample(others, 2)
        out.append(Molecule.of({x: 1, y: -1}, base))
    for _ in range(combos):
        size = rng.randint(2, min(5, len(others)))
        support = rng.sample(others, size)
        coeffs = {x: Fraction(rng.choice([-5, -4, -3, -2, -1, 1, 2, 3, 4, 5]), rng.randint(1, 4))
                  for x in support}
        out.append(Molecule.of(coeffs, base))
    return out


def sample_pairs(n_points: int, seed: int, count: int, base: int = 0) -> list[tuple[int, int]]:
    rng = random.Random(seed + 1)
    others = [x for x in range(n_points) if x != base]
    return [tuple(rng.sample(others, 2)) for _ in range(count)]


def prefix_indices(size: int, boundaries: Sequence[int], count: int = 12) -> list[int]:
    """Segment boundaries plus evenly spaced indices, always ending at ``size``."""
    picks = {b for b in boundaries if 1 <= b <= size} | {1, size}
    step = max(1, size // count)
    picks |= set(range(step, size + 1, step))
    return sorted(picks)


# -- basis report ------------------------------------------------------------


@dataclass
class ProjectionRow:
    molecule: int
    index: int
    norm: Fraction
    projected: Fraction
    residual: Fraction

    @property
    def ratio(self) -> Fraction | None:
        return None if self.norm == 0 else self.projected / self.norm


def _solve_many(metric: FiniteMetric, molecules: list, workers: int) -> list[NormResult]:
    if workers > 1 and len(molecules) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(free_norm, [metric] * len(molecules), molecules, chunksize=16))
    return [free_norm(metric, m) for m in molecules]


def basis_check(metric: FiniteMetric, tables: np.ndarray, molecules: list[Molecule],
                indices: Sequence[int], workers: int = 1):
    """Projection norms ||P_i m||, ||m - P_i m|| for each sample and prefix index.

    ``tables[i-1]`` is the index table of the i-th retraction. Returns the rows
    and the list of every NormResult computed, so callers can audit duality.
    """
    jobs, keys = [], []
    cache: dict[tuple, int] = {}

    def want(mol: Molecule) -> int:
        key = mol.key()
        if key not in cache:
            cache[key] = len(jobs)
            jobs.append(mol)
        return cache[key]

    for t, m in enumerate(molecules):
        base_job = want(m)
        for i in indices:
            p = pushforward(tables[i - 1], m, metric.base)
            keys.append((t, i, base_job, want(p), want(m - p)))
    results = _solve_many(metric, jobs, workers)
    rows = [ProjectionRow(t, i, results[a].value, results[b].value, results[c].value)
            for t, i, a, b, c in keys]
    return rows, results
