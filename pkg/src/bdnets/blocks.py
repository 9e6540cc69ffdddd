"""Quantized blocks M_n, C_n, D_n and the coarse retractions phi_n, Psi_n.

Points are integer tuples over Gamma_{N_max}. Because every Gamma_n is a
prefix of the global index range, r_n is slicing to the first |Gamma_n|
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from bdnets.linf import integer_ball, integer_shell, t_norm, t_quantize, t_truncate
from bdnets.system import BDSystem

DEFAULT_CAP = 10**6

Point = tuple[int, ...]


class CapExceeded(RuntimeError):
    def __init__(self, what: str, predicted: int, cap: int):
        super().__init__(f"{what} would hold {predicted} points, above the cap of {cap}")
        self.predicted = predicted
        self.cap = cap


def predicted_sizes(sys: BDSystem, n: int) -> dict[str, int]:
    """Exact cardinalities #M_n and #D_n, known before enumeration."""
    k = sys.chain.size(n)
    return {
        "M": (2 * sys.s(n) + 1) ** k,
        "D": (2 * sys.s(n + 1) + 1) ** k,
    }


@dataclass
class BlockChain:
    sys: BDSystem
    cap: int = DEFAULT_CAP
    M: dict[int, list[Point]] = field(default_factory=dict)
    C: dict[int, list[Point]] = field(default_factory=dict)
    D: dict[int, list[Point]] = field(default_factory=dict)
    r_M: dict[int, dict[Point, Point]] = field(default_factory=dict)
    r_D: dict[int, dict[Point, Point]] = field(default_factory=dict)
    # n(m): the unique stage with m in M_n minus M_{n-1}
    birth: dict[Point, int] = field(default_factory=dict)

    def k(self, n: int) -> int:
        return self.sys.chain.size(n)

    @property
    def n_max(self) -> int:
        return self.sys.n_max

    @property
    def points(self) -> list[Point]:
        return self.M[self.n_max]

    def build_stage(self, n: int) -> None:
        """Materialize M_n, and C_{n-1}, D_{n-1} once M_n exists."""
        if n != len(self.M) + 1:
            raise ValueError(f"stage {n} requested but stages 1..{len(self.M)} are built")
        self.sys.chain.check_stage(n)
        sys, k, s = self.sys, self.k(n), self.sys.s(n)
        size = predicted_sizes(sys, n)["M"]
        if size > self.cap:
            raise CapExceeded(f"M_{n}", size, self.cap)
        prev = self.M.get(n - 1, [])
        seen = {x[:k] for x in prev}
        assert all(t_norm(w) <= s for w in seen), "r_n(M_{n-1}) leaves the s_n ball"
        new = [t_quantize(sys.extend_tuple(n, w)) for w in integer_ball(k, s) if w not in seen]
        for x in new:
            self.birth[x] = n
        block = sorted(prev + new)
        table = {x[:k]: x for x in block}
        if len(table) != len(block):
            raise AssertionError(f"r_{n} is not injective on M_{n}")
        self.M[n] = block
        self.r_M[n] = table
        if n >= 2:
            self._build_c(n - 1)

    def _build_c(self, n: int) -> None:
        sys, k, k1 = self.sys, self.k(n), self.k(n + 1)
        size = predicted_sizes(sys, n)["D"]
        if size > self.cap:
            raise CapExceeded(f"D_{n}", size, self.cap)
        s_next = sys.s(n + 1)
        shell = integer_shell(k, sys.s(n), s_next)
        cs = []
        for w in shell:
            u = sys.extend_tuple(n, w)[:k1]
            v = t_quantize(t_truncate(u, s_next))
            cs.append(t_quantize(sys.extend_tuple(n + 1, v)))
        self.C[n] = sorted(cs)
        block = sorted(self.M[n] + cs)
        table = {x[:k]: x for x in block}
        if len(table) != len(block):
            raise AssertionError(f"r_{n} is not injective on D_{n}")
        self.D[n] = block
        self.r_D[n] = table

    # -- identification maps and retractions -------------------------------

    def inverse_restriction(self, block: str, n: int, w) -> Point:
        table = {"M": self.r_M, "D": self.r_D}[block].get(n)
        if table is None:
            raise ValueError(f"block {block}_{n} is not built")
        try:
            return table[tuple(w)]
        except KeyError:
            raise ValueError(f"{tuple(w)} is not in r_{n}({block}_{n})") from None

    def phi(self, n: int, x: Point) -> Point:
        """phi_n = (r_n|M_n)^-1 T_{s_n} r_n; the identity from N_max on."""
        if x not in self.birth:
            raise ValueError(f"{x} is not a realized point of M")
        if n >= self.n_max:
            return x
        k = self.k(n)
        return self.r_M[n][t_truncate(x[:k], self.sys.s(n))]

    def psi(self, n: int, x: Point) -> Point:
        """Psi_n = (r_{n-1}|D_{n-1})^-1 r_{n-1} on M_n."""
        if n < 2:
            raise ValueError("Psi_n is defined for n >= 2")
        if self.birth.get(x, n + 1) > n:
            raise ValueError(f"{x} is not in M_{n}")
        return self.r_D[n - 1][x[: self.k(n - 1)]]

    def export_rows(self):
        """(stage, block, coordinates...) rows for every realized block."""
        rows = []
        for n in sorted(self.M):
            rows += [(n, "M", *x) for x in self.M[n]]
            if n in self.C:
                rows += [(n, "C", *x) for x in self.C[n]]
                rows += [(n, "D", *x) for x in self.D[n]]
        return rows


def build_blocks(sys: BDSystem, upto: int | None = None, cap: int = DEFAULT_CAP) -> BlockChain:
    chain = BlockChain(sys, cap)
    for n in range(1, (upto or sys.n_max) + 1):
        chain.build_stage(n)
    return chain
