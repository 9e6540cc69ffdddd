"""One object holding every built stage, with cached index tables."""

from __future__ import annotations

from functools import cached_property

import numpy as np

from bdnets.basis import RetractionalBasis
from bdnets.blocks import DEFAULT_CAP, BlockChain, build_blocks
from bdnets.fine import DEFAULT_SHELL_CAP, FineRetractions
from bdnets.linf import PointMetric
from bdnets.system import BDSystem


class Construction:
    """Blocks through N_max and the retractional basis on M_V.

    ``stage`` is V, the stage whose realized set M_V carries the pairwise
    suites; it defaults to N_max.
    """

    def __init__(self, sys: BDSystem, stage: int | None = None,
                 cap: int = DEFAULT_CAP, shell_cap: int = DEFAULT_SHELL_CAP,
                 m1_rule: str = "repaired"):
        stage = stage or sys.n_max
        sys.chain.check_stage(stage)
        self.sys = sys
        self.stage = stage
        self.blocks: BlockChain = build_blocks(sys, cap=cap)
        self.fine = FineRetractions(self.blocks, shell_cap)
        self.m1_rule = m1_rule
        self._metrics: dict[tuple[str, int], PointMetric] = {}

    @property
    def lam(self) -> int:
        return self.sys.lambda_bar

    @cached_property
    def basis(self) -> RetractionalBasis:
        return RetractionalBasis(self.fine, self.stage, self.m1_rule)

    @cached_property
    def points(self) -> list:
        """M_V in global order."""
        return self.basis.order.points

    @cached_property
    def metric(self) -> PointMetric:
        return PointMetric(self.points)

    @cached_property
    def tables(self) -> np.ndarray:
        """tables[i-1][t] = global index (0-based) of varphi_i(points[t])."""
        return self.basis.tables()

    def block_metric(self, kind: str, n: int) -> PointMetric:
        key = (kind, n)
        if key not in self._metrics:
            pts = {"M": self.blocks.M, "D": self.blocks.D}[kind][n]
            self._metrics[key] = PointMetric(pts)
        return self._metrics[key]

    def psi_tables(self, n: int) -> np.ndarray:
        """Row i: Psi_{n,i} on M_n (lexicographic listing), i = 0..i(n)."""
        pts = self.blocks.M[n]
        pos = {p: t for t, p in enumerate(pts)}
        size = self.fine.E(n).size
        return np.array([[pos[self.fine.Psi(n, i, x)] for x in pts] for i in range(size + 1)],
                        dtype=np.int64)

    def phi_tables(self, n: int) -> np.ndarray:
        """Row i: phi_{n,i} on D_n (lexicographic listing), i = 0..c(n)."""
        pts = self.blocks.D[n]
        pos = {p: t for t, p in enumerate(pts)}
        size = self.fine.G(n).size
        return np.array([[pos[self.fine.phi(n, i, x)] for x in pts] for i in range(size + 1)],
                        dtype=np.int64)
