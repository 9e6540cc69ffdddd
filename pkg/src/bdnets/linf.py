"""Exact sup-norm arithmetic over finite index sets.

Vectors come in two flavours. ``QVec`` is the public, sparse, rational
vector with an explicit support. Inside the block machinery points are
plain tuples over a prefix ``range(k)`` of the global index set (stage
index sets are prefixes), which keeps hashing and slicing cheap; the
``t_*`` helpers work on those tuples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Rational = Fraction | int


def entire(r: Rational) -> int:
    """Entire part: the integer part of |r| carrying the sign of r."""
    if r >= 0:
        return math.floor(r)
    return -math.floor(-r)


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``"p/q"``, ``"p"`` or an int exactly. Floats are refused."""
    if isinstance(text, bool) or isinstance(text, float):
        raise ValueError(f"refusing inexact value {text!r}; write it as 'p/q'")
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    s = str(text).strip()
    if not s:
        raise ValueError("empty rational")
    if "." in s or "e" in s.lower():
        raise ValueError(f"refusing decimal literal {s!r}; write it as 'p/q'")
    return Fraction(s)


def format_rational(q: Rational) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


# -- tuple helpers ---------------------------------------------------------


def t_norm(v: Sequence[Rational]) -> Rational:
    return max((abs(c) for c in v), default=0)


def t_dist(a: Sequence[Rational], b: Sequence[Rational]) -> Rational:
    return max((abs(x - y) for x, y in zip(a, b)), default=0)


def t_quantize(v: Sequence[Rational]) -> tuple[int, ...]:
    return tuple(entire(c) for c in v)


def t_truncate(v: Sequence[Rational], s: Rational) -> tuple:
    if s < 0:
        raise ValueError(f"truncation radius must be nonnegative, got {s}")
    return tuple(c if abs(c) <= s else (s if c > 0 else -s) for c in v)


def integer_ball(dim: int, radius: int) -> list[tuple[int, ...]]:
    """All integer vectors of sup-norm <= radius, in lexicographic order."""
    return list(itertools.product(range(-radius, radius + 1), repeat=dim))


def integer_shell(dim: int, inner: int, outer: int) -> list[tuple[int, ...]]:
    """Integer vectors with inner < sup-norm <= outer, ordered by (norm, lex)."""
    pts = [
        p for p in itertools.product(range(-outer, outer + 1), repeat=dim)
        if max(map(abs, p), default=0) > inner
    ]
    pts.sort(key=lambda p: (max(map(abs, p)), p))
    return pts


# -- stage chain -----------------------------------------------------------


@dataclass(frozen=True)
class StageChain:
    """Nested index sets Gamma_1 < ... < Gamma_N, each a prefix of range(|Gamma_N|)."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("a stage chain needs at least one stage")
        if self.sizes[0] < 1:
            raise ValueError("Gamma_1 must be non-empty")
        for n in range(1, len(self.sizes)):
            if self.sizes[n] <= self.sizes[n - 1]:
                raise ValueError(
                    f"stage sizes must be strictly increasing: "
                    f"|Gamma_{n}|={self.sizes[n - 1]} >= |Gamma_{n + 1}|={self.sizes[n]}"
                )

    @property
    def n_max(self) -> int:
        return len(self.sizes)

    @property
    def dim(self) -> int:
        return self.sizes[-1]

    def check_stage(self, n: int) -> None:
        if not 1 <= n <= self.n_max:
            raise ValueError(f"stage {n} out of range 1..{self.n_max}")

    def size(self, n: int) -> int:
        """|Gamma_n|; stages past N_max are frozen at Gamma_{N_max}."""
        if n < 1:
            raise ValueError(f"stage {n} out of range")
        return self.sizes[min(n, self.n_max) - 1]

    def gamma(self, n: int) -> range:
        return range(self.size(n))

    def delta(self, n: int) -> range:
        """Increment Delta_n = Gamma_n minus Gamma_{n-1}, with Delta_1 = Gamma_1."""
        self.check_stage(n)
        lo = 0 if n == 1 else self.sizes[n - 2]
        return range(lo, self.sizes[n - 1])

    def stage_of(self, index: int) -> int:
        for n, size in enumerate(self.sizes, start=1):
            if index < size:
                return n
        raise ValueError(f"index {index} not in Gamma")


# -- QVec ------------------------------------------------------------------


@dataclass(frozen=True)
class QVec:
    """Finitely supported rational vector. Off-support coordinates read as 0."""

    support: tuple[int, ...]
    values: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.support) != len(self.values):
            raise ValueError("support and values differ in length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("repeated index in support")
        if list(self.support) != sorted(self.support):
            raise ValueError("support must be sorted")

    @classmethod
    def of(cls, values: Iterable[Rational], support: Iterable[int] | None = None) -> "QVec":
        vals = tuple(Fraction(v) for v in values)
        sup = tuple(range(len(vals))) if support is None else tuple(support)
        pairs = sorted(zip(sup, vals))
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @classmethod
    def from_map(cls, coords: Mapping[int, Rational]) -> "QVec":
        return cls.of(coords.values(), coords.keys())

    def __getitem__(self, index: int) -> Fraction:
        try:
            return self.values[self.support.index(index)]
        except ValueError:
            return Fraction(0)

    def as_map(self) -> dict[int, Fraction]:
        return dict(zip(self.support, self.values))

    def dense(self, dim: int) -> tuple[Fraction, ...]:
        out = [Fraction(0)] * dim
        for i, v in zip(self.support, self.values):
            if i >= dim:
                raise ValueError(f"index {i} outside range({dim})")
            out[i] = v
        return tuple(out)

    @property
    def sup_norm(self) -> Fraction:
        return Fraction(t_norm(self.values))

    def __sub__(self, other: "QVec") -> "QVec":
        keys = sorted(set(self.support) | set(other.support))
        return QVec(tuple(keys), tuple(self[k] - other[k] for k in keys))

    def equals(self, other: "QVec") -> bool:
        """Semantic equality (ignores explicit zeros)."""
        return (self - other).sup_norm == 0

    def __str__(self):
        body = ", ".join(f"{i}:{format_rational(v)}" for i, v in zip(self.support, self.values))
        return "{" + body + "}"


def quantize(v: QVec) -> QVec:
    return QVec(v.support, tuple(Fraction(entire(c)) for c in v.values))


def truncate(v: QVec, s: Rational) -> QVec:
    return QVec(v.support, tuple(Fraction(c) for c in t_truncate(v.values, s)))


def restrict(v: QVec, n: int, chain: StageChain) -> QVec:
    chain.check_stage(n)
    gamma = chain.gamma(n)
    return QVec(tuple(gamma), tuple(v[i] for i in gamma))


def join(x: QVec, y: QVec) -> QVec:
    """x (+) y on the disjoint union of the two supports."""
    overlap = set(x.support) & set(y.support)
    if overlap:
        raise ValueError(f"join needs disjoint supports; shared indices {sorted(overlap)}")
    return QVec.from_map({**x.as_map(), **y.as_map()})


def sup_dist(a, b) -> Fraction:
    if isinstance(a, QVec):
        return (a - b).sup_norm
    return Fraction(t_dist(a, b))


# -- Lipschitz constants ---------------------------------------------------


def lipschitz_constant(
    table: Sequence[tuple[object, object]],
    d_domain: Callable = sup_dist,
    d_range: Callable = sup_dist,
    chunks: int = 1,
) -> Fraction:
    """Largest d_range(Tx, Ty) / d_domain(x, y) over all pairs of the table.

    ``chunks`` splits the outer loop into independent slices; the result does
    not depend on it.
    """
    value, _ = lipschitz_witness(table, d_domain, d_range, chunks)
    return value


def lipschitz_witness(table, d_domain=sup_dist, d_range=sup_dist, chunks: int = 1):
    n = len(table)
    bounds = [round(k * n / max(chunks, 1)) for k in range(max(chunks, 1) + 1)]
    partial = [_max_ratio_slice(table, lo, hi, d_domain, d_range)
               for lo, hi in zip(bounds, bounds[1:])]
    best = (Fraction(0), None)
    for value, pair in partial:
        if pair is not None and (best[1] is None or value > best[0]):
            best = (value, pair)
    return best


def _max_ratio_slice(table, lo, hi, d_domain, d_range):
    best, witness = Fraction(0), None
    for a in range(lo, hi):
        x, tx = table[a]
        for b in range(a + 1, len(table)):
            y, ty = table[b]
            dd = Fraction(d_domain(x, y))
            if dd <= 0:
                raise ValueError(f"coincident domain points {x!r} and {y!r}")
            ratio = Fraction(d_range(tx, ty)) / dd
            if witness is None or ratio > best:
                best, witness = ratio, (a, b)
    return best, witness


class PointMetric:
    """Sup-norm metric on an indexed finite point set, stored as scaled integers.

    Coordinates are multiplied by the lcm of their denominators so every
    distance is ``int / scale``; the numpy arrays hold exact int64 values.
    """

    def __init__(self, points: Sequence[Sequence[Rational]]):
        self.points = [tuple(p) for p in points]
        dens = [Fraction(c).denominator for p in self.points for c in p]
        self.scale = math.lcm(*dens) if dens else 1
        scaled = [[int(Fraction(c) * self.scale) for c in p] for p in self.points]
        if any(abs(c) >= 2**61 for row in scaled for c in row):
            raise OverflowError("scaled coordinates do not fit in int64 distances")
        self.coords = np.array(scaled, dtype=np.int64).reshape(len(self.points), -1)
        self._dist = None

    def __len__(self):
        return len(self.points)

    @property
    def dist(self) -> np.ndarray:
        """Scaled integer distance matrix (divide by ``scale`` for true values)."""
        if self._dist is None:
            n = len(self.points)
            out = np.zeros((n, n), dtype=np.int64)
            step = max(1, 4_000_000 // max(1, n * self.coords.shape[1]))
            for lo in range(0, n, step):
                block = self.coords[lo:lo + step, None, :] - self.coords[None, :, :]
                out[lo:lo + step] = np.abs(block).max(axis=2) if block.shape[2] else 0
            self._dist = out
        return self._dist

    def d(self, a: int, b: int) -> Fraction:
        return Fraction(int(self.dist[a, b]), self.scale)


def indexed_lipschitz(
    domain: PointMetric,
    images: np.ndarray,
    target: PointMetric | None = None,
    subset: np.ndarray | None = None,
):
    """Exact Lipschitz constant of ``k -> images[k]`` over all pairs of the domain.

    ``images`` indexes into ``target`` (defaults to the domain). ``subset``
    restricts the domain to the given indices. Returns (value, (a, b)).
    """
    target = domain if target is None else target
    idx = np.arange(len(domain)) if subset is None else np.asarray(subset)
    dd = domain.dist[np.ix_(idx, idx)]
    img = np.asarray(images)[idx]
    di = target.dist[np.ix_(img, img)]
    iu = np.triu_indices(len(idx), k=1)
    dd, di = dd[iu], di[iu]
    if len(dd) == 0:
        return Fraction(0), None
    if (dd <= 0).any():
        raise ValueError("coincident domain points")
    best, witness = Fraction(-1), None
    # Exact max of di/dd: group by the (few) distinct domain distances.
    for value in np.unique(dd):
        mask = dd == value
        top = int(di[mask].max())
        ratio = Fraction(top * domain.scale, int(value) * target.scale)
        if ratio > best:
            pos = np.flatnonzero(mask)[int(np.argmax(di[mask]))]
            best, witness = ratio, (int(idx[iu[0][pos]]), int(idx[iu[1][pos]]))
    return best, witness
