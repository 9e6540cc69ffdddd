"""One-point-at-a-time refinement of Psi_n and phi_n.

Both ladders are built from local retractions that move a single point one
shell inwards. A local move always lands on a point with a smaller index,
so the composite ``Psi_{n,i} = psi_{n,i+1} o ... o psi_{n,i(n)}`` amounts to
following parent links until the index drops to ``i``; the same holds for
``phi_{n,i}``. The ``*_literal`` variants apply the local maps one by one
and serve as the reference the fast path is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from bdnets.blocks import BlockChain, CapExceeded, Point
from bdnets.linf import integer_shell, t_norm, t_truncate

DEFAULT_SHELL_CAP = 10**6


class ShellOrder:
    """Integer vectors over Delta_n ordered by (sup-norm, lex), starting at 0."""

    def __init__(self, dim: int, max_shell: int, cap: int = DEFAULT_SHELL_CAP):
        if max_shell < 0:
            raise ValueError("max_shell must be nonnegative")
        size = (2 * max_shell + 1) ** dim
        if size > cap:
            raise CapExceeded(f"shells up to {max_shell} over {dim} coordinates", size, cap)
        self.dim = dim
        self.max_shell = max_shell
        self.ys: list[Point] = [(0,) * dim] + integer_shell(dim, 0, max_shell)
        self.index = {y: j for j, y in enumerate(self.ys)}
        self.norms = [t_norm(y) for y in self.ys]
        self._m_rows: dict[int, list[int]] = {}

    def __len__(self):
        return len(self.ys)

    def local(self, j: int, y: Point) -> Point:
        """T^n_j: moves y_j to its truncation one shell in, fixes the rest."""
        if j < 1:
            raise ValueError("local retractions are indexed from 1")
        if y != self.ys[j]:
            return y
        return t_truncate(y, self.norms[j] - 1)

    def m_value(self, j1: int, j2: int) -> int:
        """m(j2, j1): the radius with T_{j1+1} o ... o T_{j2}(y_{j2}) = T_m(y_{j2})."""
        if not 0 <= j1 < j2 < len(self.ys):
            raise ValueError(f"m_value needs 0 <= j1 < j2 < {len(self.ys)}, got {j1}, {j2}")
        row = self._m_rows.get(j2)
        if row is None:
            row = self._m_row(j2)
            self._m_rows[j2] = row
        return row[j1]

    def _m_row(self, j2: int) -> list[int]:
        # row[j1] for every j1 < j2 from one downward pass of the composition
        target = self.ys[j2]
        row = [0] * j2
        y = target
        for j in range(j2, 0, -1):
            y = self.local(j, y)
            m = t_norm(y)
            if t_truncate(target, m) != y:
                raise AssertionError(
                    f"composition T_{j}..T_{j2}(y_{j2}) = {y} is not a truncation of {target}"
                )
            row[j - 1] = m
        return row


@dataclass
class EIndex:
    n: int
    d: list[Point]                 # D_{n-1} listing, d[k-1] = d^n_k
    pairs: list[tuple[int, int]]   # e^n_i = pairs[i-1] = (j, k)
    x: list[Point]                 # x^n_i = x[i-1]
    order: ShellOrder

    @property
    def size(self) -> int:
        return len(self.pairs)

    @cached_property
    def position(self) -> dict[Point, int]:
        """Index i of x^n_i; points of D_{n-1} map to 0."""
        pos = {p: i for i, p in enumerate(self.x, start=1)}
        pos.update({p: 0 for p in self.d})
        return pos

    @cached_property
    def K(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for j, k in self.pairs:
            out.setdefault(j, []).append(k)
        return out

    @property
    def J(self) -> list[int]:
        return sorted(self.K)


@dataclass
class GIndex:
    n: int
    z: list[Point]   # z^n_i = z[i-1]
    c: list[Point]   # c^n_i = c[i-1]

    @property
    def size(self) -> int:
        return len(self.c)

    @cached_property
    def position(self) -> dict[Point, int]:
        return {p: i for i, p in enumerate(self.c, start=1)}


class FineRetractions:
    def __init__(self, blocks: BlockChain, shell_cap: int = DEFAULT_SHELL_CAP):
        self.blocks = blocks
        self.sys = blocks.sys
        self.shell_cap = shell_cap
        self._E: dict[int, EIndex] = {}
        self._G: dict[int, GIndex] = {}
        self._psi_parent: dict[int, list[Point]] = {}
        self._phi_parent: dict[int, list[Point]] = {}

    # -- Psi ladder --------------------------------------------------------

    def shell_order(self, n: int) -> ShellOrder:
        return self.E(n).order

    def E(self, n: int) -> EIndex:
        if n not in self._E:
            self._E[n] = self._build_E(n)
        return self._E[n]

    def _build_E(self, n: int) -> EIndex:
        if n < 2:
            raise ValueError("E(n) is defined for n >= 2")
        b = self.blocks
        if n not in b.M:
            raise ValueError(f"M_{n} is not built")
        s = self.sys.s(n)
        lo, hi = b.k(n - 1), b.k(n)
        # ||d|Delta|| <= s_n, so only shells up to 2 s_n can meet N_{s_n}
        order = ShellOrder(hi - lo, 2 * s, self.shell_cap)
        d = b.D[n - 1]
        tails = [p[lo:hi] for p in d]
        pairs, xs = [], []
        table = b.r_M[n]
        for j in range(1, len(order)):
            y = order.ys[j]
            for k, tail in enumerate(tails, start=1):
                w = tuple(a + c for a, c in zip(tail, y))
                if t_norm(w) <= s:
                    pairs.append((j, k))
                    xs.append(table[d[k - 1][:lo] + w])
        index = EIndex(n, d, pairs, xs, order)
        expected = set(b.M[n]) - set(d)
        if len(set(xs)) != len(xs) or set(xs) != expected:
            raise AssertionError(f"E({n}) does not enumerate M_{n} minus D_{n-1} bijectively")
        return index

    def x_point(self, n: int, j: int, k: int, y: Point | None = None) -> Point:
        """(r_n|M_n)^-1(r_{n-1}(d_k) (+) (d_k|Delta_n + y)), y defaulting to y_j."""
        e = self.E(n)
        lo = self.blocks.k(n - 1)
        dk = e.d[k - 1]
        y = e.order.ys[j] if y is None else y
        w = tuple(a + c for a, c in zip(dk[lo:], y))
        return self.blocks.r_M[n][dk[:lo] + w]

    def local_psi(self, n: int, i: int, x: Point) -> Point:
        """psi_{n,i}: moves x^n_i one shell in along its d-fibre."""
        e = self.E(n)
        if not 1 <= i <= e.size:
            raise ValueError(f"psi_{{{n},{i}}} out of range 1..{e.size}")
        if x != e.x[i - 1]:
            return x
        j, k = e.pairs[i - 1]
        return self.x_point(n, j, k, e.order.local(j, e.order.ys[j]))

    def _psi_parents(self, n: int) -> list[Point]:
        if n not in self._psi_parent:
            e = self.E(n)
            self._psi_parent[n] = [self.local_psi(n, i, e.x[i - 1]) for i in range(1, e.size + 1)]
        return self._psi_parent[n]

    def Psi(self, n: int, i: int, x: Point) -> Point:
        """Psi_{n,i} on M_n, for 0 <= i <= i(n) (i(n) gives the identity)."""
        e = self.E(n)
        if not 0 <= i <= e.size:
            raise ValueError(f"Psi_{{{n},{i}}} out of range 0..{e.size}")
        pos = e.position
        if x not in pos:
            raise ValueError(f"{x} is not in M_{n}")
        parent = self._psi_parents(n)
        p = pos[x]
        while p > i:
            x = parent[p - 1]
            p = pos[x]
        return x

    def Psi_literal(self, n: int, i: int, x: Point) -> Point:
        e = self.E(n)
        for l in range(e.size, i, -1):
            x = self.local_psi(n, l, x)
        return x

    def big_M(self, n: int, i1: int, i2: int) -> int:
        e = self.E(n)
        if not 1 <= i1 < i2 <= e.size:
            raise ValueError(f"big_M needs 1 <= i1 < i2 <= {e.size}, got {i1}, {i2}")
        j1, k1 = e.pairs[i1 - 1]
        j2, k2 = e.pairs[i2 - 1]
        if k2 <= k1:
            return e.order.m_value(j1, j2)
        return e.order.m_value(j1 - 1, j2)

    def Psi_closed_form(self, n: int, i1: int, i2: int) -> Point:
        """The closed form claimed for Psi_{n,i1}(x^n_{i2}) when i1 < i2."""
        e = self.E(n)
        j2, k2 = e.pairs[i2 - 1]
        radius = self.big_M(n, i1, i2)
        return self.x_point(n, j2, k2, t_truncate(e.order.ys[j2], radius))

    # -- phi ladder --------------------------------------------------------

    def G(self, n: int) -> GIndex:
        if n not in self._G:
            b = self.blocks
            if n not in b.D:
                raise ValueError(f"D_{n} is not built")
            z = integer_shell(b.k(n), self.sys.s(n), self.sys.s(n + 1))
            c = [b.r_D[n][w] for w in z]
            if set(c) != set(b.C[n]) or len(c) != len(b.C[n]):
                raise AssertionError(f"G({n}) does not enumerate C_{n} bijectively")
            self._G[n] = GIndex(n, z, c)
        return self._G[n]

    def local_T(self, n: int, i: int, x: Point) -> Point:
        """T_{n,i}: moves c^n_i one shell in, fixes everything else."""
        g = self.G(n)
        if not 1 <= i <= g.size:
            raise ValueError(f"T_{{{n},{i}}} out of range 1..{g.size}")
        if x != g.c[i - 1]:
            return x
        z = g.z[i - 1]
        return self.blocks.r_D[n][t_truncate(z, t_norm(z) - 1)]

    def _phi_parents(self, n: int) -> list[Point]:
        if n not in self._phi_parent:
            g = self.G(n)
            self._phi_parent[n] = [self.local_T(n, i, g.c[i - 1]) for i in range(1, g.size + 1)]
        return self._phi_parent[n]

    def phi(self, n: int, i: int, x: Point) -> Point:
        """phi_{n,i} on D_n, for 0 <= i <= c(n) (c(n) gives the identity)."""
        g = self.G(n)
        if not 0 <= i <= g.size:
            raise ValueError(f"phi_{{{n},{i}}} out of range 0..{g.size}")
        if self.blocks.r_D[n].get(x[: self.blocks.k(n)]) != x:
            raise ValueError(f"{x} is not in D_{n}")
        pos = g.position
        parent = self._phi_parents(n)
        p = pos.get(x, 0)
        while p > i:
            x = parent[p - 1]
            p = pos.get(x, 0)
        return x

    def phi_literal(self, n: int, i: int, x: Point) -> Point:
        g = self.G(n)
        for l in range(g.size, i, -1):
            x = self.local_T(n, l, x)
        return x

    def phi_closed_form(self, n: int, i: int, x: Point) -> Point:
        k = self.blocks.k(n)
        radius = t_norm(self.phi(n, i, x)[:k])
        return self.blocks.r_D[n][t_truncate(x[:k], radius)]

    # -- exports -----------------------------------------------------------

    def export_E(self, n: int):
        e = self.E(n)
        return [(i, j, k) for i, (j, k) in enumerate(e.pairs, start=1)]

    def export_G(self, n: int):
        g = self.G(n)
        return [(i, t_norm(z), *z) for i, z in enumerate(g.z, start=1)]


def shell_enumeration(dim: int, max_shell: int, cap: int = DEFAULT_SHELL_CAP) -> ShellOrder:
    return ShellOrder(dim, max_shell, cap)
