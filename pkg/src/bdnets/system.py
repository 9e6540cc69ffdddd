"""Finite-stage Bourgain-Delbaen systems.

A system is given by one-step extension rows: each new coordinate of
Delta_{n+1} is a rational linear functional of the coordinates in Gamma_n.
The composed extensions i_n map l_inf(Gamma_n) into l_inf(Gamma_{N_max});
beyond N_max the chain is frozen and the extension is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from bdnets.linf import QVec, StageChain, format_rational, parse_rational

PRESETS = ("zero", "affine")


class ConfigError(ValueError):
    """Bad system or run description; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


Matrix = tuple[tuple[Fraction, ...], ...]


def _matmul(a: Matrix, b: Matrix) -> Matrix:
    cols = list(zip(*b)) if b else []
    return tuple(tuple(sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in cols) for row in a)


def _row_sum_norm(m: Matrix) -> tuple[Fraction, int]:
    best, arg = Fraction(0), 0
    for r, row in enumerate(m):
        s = sum((abs(c) for c in row), Fraction(0))
        if s > best:
            best, arg = s, r
    return best, arg


@dataclass(frozen=True)
class BDSystem:
    chain: StageChain
    # steps[n-1][t] is the row over Gamma_n for the t-th index of Delta_{n+1}
    steps: tuple[tuple[tuple[Fraction, ...], ...], ...]
    lambda_bar: int
    ext: tuple[Matrix, ...] = field(repr=False)
    _sparse: tuple = field(repr=False, compare=False)

    @property
    def n_max(self) -> int:
        return self.chain.n_max

    @property
    def dim(self) -> int:
        return self.chain.dim

    def s(self, n: int) -> int:
        return self.lambda_bar ** n

    def matrix(self, n: int) -> Matrix:
        """Matrix of i_n (dim x |Gamma_n|)."""
        return self.ext[min(n, self.n_max) - 1]

    def norm(self, n: int) -> Fraction:
        return _row_sum_norm(self.matrix(n))[0]

    def extend_tuple(self, n: int, v: Sequence) -> tuple:
        """i_n on a plain coordinate tuple over Gamma_n."""
        n = min(n, self.n_max)
        k = self.chain.size(n)
        if len(v) != k:
            raise ValueError(f"vector has {len(v)} coordinates, Gamma_{n} has {k}")
        out = list(v)
        for terms in self._sparse[n - 1]:
            acc = 0
            for col, coef in terms:
                acc += coef * v[col]
            out.append(acc)
        return tuple(out)

    @property
    def is_integral(self) -> bool:
        return all(c.denominator == 1 for m in self.ext for row in m for c in row)


def extend(sys: BDSystem, n: int, v: QVec) -> QVec:
    sys.chain.check_stage(n)
    gamma = set(sys.chain.gamma(n))
    stray = [i for i, c in zip(v.support, v.values) if i not in gamma and c != 0]
    if stray:
        raise ValueError(f"vector not supported on Gamma_{n}: indices {stray}")
    out = sys.extend_tuple(n, v.dense(sys.chain.size(n)))
    return QVec.of(out)


def lambda_of(sys: BDSystem) -> Fraction:
    return max(sys.norm(n) for n in range(1, sys.n_max + 1))


def _compose(chain: StageChain, steps) -> tuple[Matrix, ...]:
    n_max = chain.n_max
    dim = chain.dim
    ident = tuple(tuple(Fraction(int(r == c)) for c in range(dim)) for r in range(dim))
    ext: list[Matrix] = [ident]
    for n in range(n_max - 1, 0, -1):
        k = chain.size(n)
        one_step = tuple(
            tuple(Fraction(int(r == c)) for c in range(k)) for r in range(k)
        ) + tuple(steps[n - 1])
        ext.append(_matmul(ext[-1], one_step))
    return tuple(reversed(ext))


def _sparse_rows(chain: StageChain, ext) -> tuple:
    out = []
    for n in range(1, chain.n_max + 1):
        k = chain.size(n)
        rows = []
        for row in ext[n - 1][k:]:
            rows.append(tuple((c, int(x) if x.denominator == 1 else x)
                              for c, x in enumerate(row) if x != 0))
        out.append(tuple(rows))
    return tuple(out)


def make_system(sizes: Sequence[int], steps, lambda_bar: int) -> BDSystem:
    """Assemble and validate a system from stage sizes and one-step rows."""
    chain = StageChain(tuple(sizes))
    if len(steps) != chain.n_max - 1:
        raise ConfigError("extension", f"expected rows for {chain.n_max - 1} steps, got {len(steps)}")
    for n in range(1, chain.n_max):
        want = len(chain.delta(n + 1))
        if len(steps[n - 1]) != want:
            raise ConfigError("extension", f"Delta_{n + 1} has {want} indices, got {len(steps[n - 1])} rows")
        for t, row in enumerate(steps[n - 1]):
            if len(row) != chain.size(n):
                gamma = chain.delta(n + 1)[t]
                raise ConfigError(
                    f"extension.rows.{gamma}",
                    f"row must have |Gamma_{n}| = {chain.size(n)} coefficients, got {len(row)}",
                )
    if isinstance(lambda_bar, bool) or not isinstance(lambda_bar, int) or lambda_bar < 1:
        raise ConfigError("lambda_bar", f"must be a positive integer, got {lambda_bar!r}")
    steps = tuple(tuple(tuple(Fraction(c) for c in row) for row in rows) for rows in steps)
    ext = _compose(chain, steps)
    for n in range(1, chain.n_max + 1):
        norm, row = _row_sum_norm(ext[n - 1])
        if norm > lambda_bar:
            coeffs = ", ".join(format_rational(c) for c in ext[n - 1][row])
            raise ConfigError(
                "lambda_bar",
                f"lambda_bar={lambda_bar} is below ||i_{n}|| = {format_rational(norm)} "
                f"(composed row for index {row}: [{coeffs}])",
            )
    sys = BDSystem(chain, steps, lambda_bar, ext, _sparse_rows(chain, ext))
    _assert_compatible(sys)
    return sys


def _assert_compatible(sys: BDSystem) -> None:
    # i_m r_m i_n = i_n as matrices; exact and complete since all maps are linear.
    for n in range(1, sys.n_max + 1):
        for m in range(n + 1, sys.n_max + 1):
            head = sys.matrix(n)[: sys.chain.size(m)]
            if _matmul(sys.matrix(m), head) != sys.matrix(n):
                raise ValueError(f"extensions i_{n} and i_{m} are not compatible")


def preset_steps(chain: StageChain, preset: str, coefficient: Fraction = Fraction(1, 2)):
    steps = []
    for n in range(1, chain.n_max):
        k = chain.size(n)
        rows = []
        for _ in chain.delta(n + 1):
            if preset == "zero":
                rows.append((Fraction(0),) * k)
            elif preset == "affine":
                rows.append((coefficient,) + (Fraction(0),) * (k - 1))
            else:
                raise ConfigError("extension", f"unknown preset {preset!r}; choose from {PRESETS}")
        steps.append(tuple(rows))
    return steps


def _rows_from_mapping(chain: StageChain, rows: Mapping[str, Any]):
    given = {}
    for key, row in rows.items():
        where = f"extension.rows.{key}"
        try:
            gamma = int(key)
        except (TypeError, ValueError):
            raise ConfigError(where, "row keys must be integer indices") from None
        if not 0 <= gamma < chain.dim:
            raise ConfigError(where, f"index {gamma} is outside Gamma_{chain.n_max} = 0..{chain.dim - 1}")
        if gamma < chain.size(1):
            raise ConfigError(
                where,
                f"index {gamma} belongs to Gamma_1; an extension cannot redefine an old coordinate",
            )
        if not isinstance(row, list):
            raise ConfigError(where, "row must be a list of 'p/q' strings")
        try:
            given[gamma] = tuple(parse_rational(c) for c in row)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(where, str(exc)) from None
    steps = []
    for n in range(1, chain.n_max):
        stage_rows = []
        for gamma in chain.delta(n + 1):
            if gamma not in given:
                raise ConfigError(f"extension.rows.{gamma}", f"missing row for index {gamma} of Delta_{n + 1}")
            stage_rows.append(given[gamma])
        steps.append(tuple(stage_rows))
    return steps


def build_system(config: Mapping[str, Any]) -> BDSystem:
    """Build from a parsed description.

    Fields: ``stages`` (sizes), ``extension`` (``"zero"``, ``"affine"`` or
    ``{"rows": {index: [p/q, ...]}}``), ``affine_coefficient``, ``lambda_bar``,
    ``n_max`` (defaults to the number of stages).
    """
    sizes = config.get("stages")
    if not isinstance(sizes, list) or not sizes or not all(isinstance(s, int) and not isinstance(s, bool) for s in sizes):
        raise ConfigError("stages", "must be a non-empty list of integers")
    n_max = config.get("n_max", len(sizes))
    if not isinstance(n_max, int) or not 1 <= n_max <= len(sizes):
        raise ConfigError("n_max", f"must be an integer in 1..{len(sizes)}, got {n_max!r}")
    try:
        chain = StageChain(tuple(sizes[:n_max]))
    except ValueError as exc:
        raise ConfigError("stages", str(exc)) from None
    ext = config.get("extension", "zero")
    if isinstance(ext, str):
        try:
            coefficient = parse_rational(config.get("affine_coefficient", "1/2"))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError("affine_coefficient", str(exc)) from None
        steps = preset_steps(chain, ext, coefficient)
    elif isinstance(ext, Mapping) and isinstance(ext.get("rows"), Mapping):
        steps = _rows_from_mapping(chain, ext["rows"])
    else:
        raise ConfigError("extension", "must be a preset name or {\"rows\": {...}}")
    if "lambda_bar" not in config:
        raise ConfigError("lambda_bar", "missing")
    return make_system(chain.sizes, steps, config["lambda_bar"])
