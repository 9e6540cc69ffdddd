"""Invariant suites. Each returns a SuiteResult with the bound, the worst
observed value and a witness; all comparisons are exact.

Pointwise suites run on every built stage. Pairwise and composition suites
run on the realized set M_V of the construction (V = ``Construction.stage``).
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from bdnets import linf
from bdnets.basis import (
    ambient_sample, extract_net, k_global, perturb, project_rho, transfer_basis,
)
from bdnets.construction import Construction
from bdnets.free_space import (
    FiniteMetric, Molecule, basis_check, dual_lp_norm, free_norm, prefix_indices,
    pushforward, sample_molecules, sample_pairs,
)
from bdnets.linf import (
    PointMetric, QVec, format_rational, indexed_lipschitz, integer_ball, t_dist, t_norm,
    t_truncate,
)
from bdnets.system import lambda_of


@dataclass
class SuiteResult:
    name: str
    group: str
    claim: str
    bound: str
    worst: str
    passed: bool
    checked: int = 0
    witness: str = ""
    notes: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.claim} (bound {self.bound}, worst {self.worst}, {self.checked} checks)"

    def as_dict(self) -> dict:
        return {
            "name": self.name, "group": self.group, "claim": self.claim, "bound": self.bound,
            "worst": self.worst, "passed": self.passed, "checked": self.checked,
            "witness": self.witness, "notes": self.notes,
        }


def _plain(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (tuple, list)):
        return type(obj)(_plain(o) for o in obj)
    return obj


def _q(v) -> str:
    return format_rational(v) if v is not None else "-"


def _margin(bound, worst) -> str:
    return _q(Fraction(bound) - Fraction(worst))


@dataclass
class Settings:
    seed: int = 0
    a: Fraction = Fraction(2)
    density_step: Fraction = Fraction(1, 2)
    elementary: int = 20
    pairs: int = 20
    combos: int = 20
    prefix_count: int = 12
    cross_check_max: int = 4
    linf_samples: int = 200
    sample_cap: int = 20_000
    workers: int = 1


def _commutation(T: np.ndarray):
    """Check T[r1] o T[r2] == T[min(r1, r2)] for every pair of rows."""
    R = len(T)
    rows = np.arange(R)
    for r2 in range(R):
        comp = T[:, T[r2]]
        want = T[np.minimum(rows, r2)]
        bad = np.argwhere(comp != want)
        if len(bad):
            r1, t = bad[0]
            return False, (int(r1), r2, int(t)), R * R * T.shape[1]
    return True, None, R * R * T.shape[1]


def _lipschitz_max(maps):
    """maps: iterable of (label, domain, images, target). Returns worst (value, label, pair)."""
    worst = (Fraction(0), None, None)
    count = 0
    for label, dom, img, tgt in maps:
        value, pair = indexed_lipschitz(dom, img, tgt)
        count += len(dom) * (len(dom) - 1) // 2
        if worst[1] is None or value > worst[0]:
            worst = (value, label, pair)
    return worst, count


class Verifier:
    def __init__(self, con: Construction, settings: Settings | None = None):
        self.con = con
        self.s = settings or Settings()
        self.sys = con.sys
        self.b = con.blocks
        self.f = con.fine
        self.V = con.stage
        self.lam = con.lam
        self._net = None
        self._lip_by_index = None
        self._free = None

    # -- registry ------------------------------------------------------------

    def suites(self) -> dict[str, tuple[str, Callable[[], SuiteResult]]]:
        return {
            "linf.quantize": ("linf", self.linf_quantize),
            "linf.truncate": ("linf", self.linf_truncate),
            "linf.nonexpansive": ("linf", self.linf_nonexpansive),
            "linf.lipschitz_identity": ("linf", self.linf_identity),
            "bd.compatibility": ("bd", self.bd_compatibility),
            "bd.extension_property": ("bd", self.bd_extension),
            "bd.lambda_bound": ("bd", self.bd_lambda),
            "blocks.dense": ("blocks", self.blocks_dense),
            "blocks.inverse_M": ("blocks", self.blocks_inverse_m),
            "blocks.inverse_D": ("blocks", self.blocks_inverse_d),
            "blocks.c_placement": ("blocks", self.blocks_c_placement),
            "blocks.phi_ladder": ("blocks", self.blocks_phi_ladder),
            "blocks.psi_commutation": ("blocks", self.blocks_psi_commutation),
            "blocks.factorization": ("blocks", self.blocks_factorization),
            "fine.shell_order": ("fine", self.fine_shell_order),
            "fine.m_bounds": ("fine", self.fine_m_bounds),
            "fine.local_composition": ("fine", self.fine_local_composition),
            "fine.E_bijection": ("fine", self.fine_E_bijection),
            "fine.Psi_commutation": ("fine", self.fine_Psi_commutation),
            "fine.Psi_anchor": ("fine", self.fine_Psi_anchor),
            "fine.closed_form": ("fine", self.fine_closed_form),
            "fine.big_M_bounds": ("fine", self.fine_big_M_bounds),
            "fine.Psi_lipschitz": ("fine", self.fine_Psi_lipschitz),
            "fine.G_order": ("fine", self.fine_G_order),
            "fine.phi_commutation": ("fine", self.fine_phi_commutation),
            "fine.phi_anchor": ("fine", self.fine_phi_anchor),
            "fine.phi_closed_form": ("fine", self.fine_phi_closed_form),
            "fine.sandwich": ("fine", self.fine_sandwich),
            "fine.phi_lipschitz": ("fine", self.fine_phi_lipschitz),
            "basis.global_order": ("basis", self.basis_order),
            "basis.commutation": ("basis", self.basis_commutation),
            "basis.lipschitz": ("basis", self.basis_lipschitz),
            "basis.rho": ("basis", self.basis_rho),
            "basis.density": ("basis", self.basis_density),
            "net.certificate": ("net", self.net_certificate),
            "net.transfer": ("net", self.net_transfer),
            "free.strong_duality": ("free", self.free_duality),
            "free.elementary": ("free", self.free_elementary),
            "free.norm_axioms": ("free", self.free_axioms),
            "free.pushforward_bound": ("free", self.free_pushforward),
            "free.projection_bound": ("free", self.free_projection),
            "free.projection_commutation": ("free", self.free_projection_commutation),
            "free.residual": ("free", self.free_residual),
        }

    def select(self, selection=None) -> list[str]:
        """Suite names for a selection of suite or group names; None means all."""
        reg = self.suites()
        if selection is None:
            return list(reg)
        names = []
        for sel in selection:
            hits = [n for n, (g, _) in reg.items() if n == sel or g == sel]
            if not hits:
                raise ValueError(f"unknown suite or group {sel!r}")
            names += [h for h in hits if h not in names]
        return names

    def run(self, selection=None) -> list[SuiteResult]:
        reg = self.suites()
        out = []
        for name in self.select(selection):
            group, fn = reg[name]
            res = fn()
            res.name, res.group = name, group
            out.append(res)
        return out

    def _res(self, claim, bound, worst, passed, checked, witness="", **notes):
        return SuiteResult("", "", claim, str(bound), str(worst), bool(passed), checked,
                           str(_plain(witness)) if witness is not None else "", notes)

    # -- linf-core -------------------------------------------------------------

    def _rational_samples(self):
        rng = random.Random(self.s.seed)
        dim = self.sys.dim
        return [QVec.of(Fraction(rng.randint(-40, 40), rng.randint(1, 8)) for _ in range(dim))
                for _ in range(self.s.linf_samples)]

    def linf_quantize(self):
        bad = None
        vs = self._rational_samples()
        for v in vs:
            q = linf.quantize(v)
            ok = (linf.quantize(q) == q and all(c.denominator == 1 for c in q.values)
                  and all(abs(a) <= abs(c) and a * c >= 0 for a, c in zip(q.values, v.values)))
            if not ok:
                bad = v
                break
        return self._res("quantize is idempotent, integral, shrinking, sign-preserving",
                         "exact", "ok" if bad is None else "violation", bad is None, len(vs), bad)

    def linf_truncate(self):
        vs = self._rational_samples()
        worst, bad, n = Fraction(-10**9), None, 0
        for v in vs:
            for s in (Fraction(0), Fraction(1, 2), Fraction(1), Fraction(3), Fraction(7, 2)):
                t = linf.truncate(v, s)
                slack = t.sup_norm - min(s, v.sup_norm)
                n += 1
                if slack > worst:
                    worst = slack
                ok = slack <= 0 and all(
                    (a == c) if abs(c) <= s else (a == (s if c > 0 else -s))
                    for a, c in zip(t.values, v.values))
                if not ok and bad is None:
                    bad = (v, s)
        return self._res("||T_s v|| <= min(s, ||v||), in-band coordinates fixed", "slack <= 0",
                         _q(worst), bad is None, n, bad)

    def linf_nonexpansive(self):
        vs = self._rational_samples()
        chain = self.sys.chain
        worst, n = Fraction(0), 0
        for v, w in zip(vs[::2], vs[1::2]):
            d = (v - w).sup_norm
            if d == 0:
                continue
            for s in (Fraction(1), Fraction(5, 2)):
                worst = max(worst, (linf.truncate(v, s) - linf.truncate(w, s)).sup_norm / d)
                n += 1
            for stage in range(1, chain.n_max + 1):
                worst = max(worst, (linf.restrict(v, stage, chain) - linf.restrict(w, stage, chain)).sup_norm / d)
                n += 1
        return self._res("truncate and restrict are 1-Lipschitz on sampled pairs", 1, _q(worst),
                         worst <= 1, n)

    def linf_identity(self):
        pts = self.b.M[min(2, self.b.n_max)]
        value = linf.lipschitz_constant([(p, p) for p in pts], chunks=3)
        return self._res("Lipschitz constant of the identity on a realized block", 1, _q(value),
                         value == 1, len(pts) * (len(pts) - 1) // 2)

    # -- bd-system -------------------------------------------------------------

    def _stage_samples(self, n):
        k, s = self.sys.chain.size(n), self.sys.s(n)
        pts = integer_ball(k, s)
        if len(pts) > self.s.sample_cap:
            rng = random.Random(self.s.seed + n)
            pts = rng.sample(pts, self.s.sample_cap)
        return pts

    def bd_compatibility(self):
        sys, n_checks = self.sys, 0
        for n in range(1, sys.n_max + 1):
            for v in self._stage_samples(n):
                u = sys.extend_tuple(n, v)
                for m in range(n + 1, sys.n_max + 1):
                    n_checks += 1
                    if sys.extend_tuple(m, u[: sys.chain.size(m)]) != u:
                        return self._res("i_n = i_m r_m i_n", "exact", "mismatch", False, n_checks, (n, m, v))
        return self._res("i_n = i_m r_m i_n on quantized s_n balls", "exact", "equal", True, n_checks)

    def bd_extension(self):
        sys, n_checks = self.sys, 0
        for n in range(1, sys.n_max + 1):
            k = sys.chain.size(n)
            for v in self._stage_samples(n):
                n_checks += 1
                if sys.extend_tuple(n, v)[:k] != v:
                    return self._res("r_n i_n v = v", "exact", "mismatch", False, n_checks, (n, v))
        return self._res("restrict(extend(n, v), n) = v", "exact", "equal", True, n_checks)

    def bd_lambda(self):
        lam = lambda_of(self.sys)
        return self._res("sup_n ||i_n|| <= lambda_bar", self.lam, _q(lam), lam <= self.lam,
                         self.sys.n_max, notes={"norms": [_q(self.sys.norm(n)) for n in range(1, self.sys.n_max + 1)]})

    # -- net-blocks ------------------------------------------------------------

    def blocks_dense(self):
        worst, wit, count = Fraction(0), None, 0
        for n, pts in self.b.M.items():
            k = self.b.k(n)
            for x in pts:
                d = Fraction(t_dist(self.sys.extend_tuple(n, x[:k]), x))
                count += 1
                if d > worst:
                    worst, wit = d, (n, x)
        bound = self.lam + 1
        return self._res("||i_n r_n x - x|| <= lambda + 1 on M_n", bound, _q(worst), worst <= bound,
                         count, wit, margin=_margin(bound, worst))

    def _identification(self, kind, n, radius):
        pts = {"M": self.b.M, "D": self.b.D}[kind][n]
        k = self.b.k(n)
        images = [x[:k] for x in pts]
        ball = set(integer_ball(k, radius))
        return pts, images, len(set(images)) == len(images) and set(images) == ball

    def blocks_inverse_m(self):
        bound = 3 * self.lam + 2
        ok, worst, wit, count = True, Fraction(0), None, 0
        for n in sorted(self.b.M):
            pts, images, bij = self._identification("M", n, self.sys.s(n))
            ok &= bij
            if n <= self.V:
                value, pair = indexed_lipschitz(PointMetric(images), np.arange(len(pts)),
                                                self.con.block_metric("M", n))
                count += len(pts) * (len(pts) - 1) // 2
                if value > worst:
                    worst, wit = value, (n, pts[pair[0]], pts[pair[1]])
        sizes = {n: len(p) for n, p in self.b.M.items()}
        return self._res("r_n|M_n bijects onto f(s_n B); inverse is (3 lambda+2)-Lipschitz",
                         bound, _q(worst), ok and worst <= bound, count, wit,
                         sizes=sizes, margin=_margin(bound, worst))

    def blocks_inverse_d(self):
        bound = self.lam**2 + 2 * self.lam + 2
        ok, worst, wit, count = True, Fraction(0), None, 0
        for n in sorted(self.b.D):
            pts, images, bij = self._identification("D", n, self.sys.s(n + 1))
            ok &= bij
            if n < self.V:
                value, pair = indexed_lipschitz(PointMetric(images), np.arange(len(pts)),
                                                self.con.block_metric("D", n))
                count += len(pts) * (len(pts) - 1) // 2
                if value > worst:
                    worst, wit = value, (n, pts[pair[0]], pts[pair[1]])
        return self._res("r_n|D_n bijects onto f(s_{n+1} B); inverse is (lambda^2+2 lambda+2)-Lipschitz",
                         bound, _q(worst), ok and worst <= bound, count, wit,
                         sizes={n: len(p) for n, p in self.b.D.items()}, margin=_margin(bound, worst))

    def blocks_c_placement(self):
        ok, count = True, 0
        for n, cs in self.b.C.items():
            cs_set, m_n, m_next = set(cs), set(self.b.M[n]), set(self.b.M[n + 1])
            count += len(cs)
            ok &= not (cs_set & m_n) and cs_set <= m_next
        return self._res("C_n is disjoint from M_n and inside M_{n+1}", "exact",
                         "ok" if ok else "violation", ok, count,
                         sizes={n: len(c) for n, c in self.b.C.items()})

    def blocks_phi_ladder(self):
        pts = self.con.points
        pos = self.con.basis.order.index
        stages = range(1, self.b.n_max + 1)
        T = np.array([[pos[self.b.phi(n, x)] - 1 for x in pts] for n in stages], dtype=np.int64)
        comm_ok, wit, count = _commutation(T)
        maps = [(n, self.con.metric, T[n - 1], self.con.metric) for n in stages]
        (worst, label, pair), pairs = _lipschitz_max(maps)
        bound = 3 * self.lam + 2
        return self._res("phi_n o phi_m = phi_min(m,n) and phi_n is (3 lambda+2)-Lipschitz",
                         bound, _q(worst), comm_ok and worst <= bound, count + pairs,
                         wit if not comm_ok else (label, pair), margin=_margin(bound, worst))

    def blocks_psi_commutation(self):
        count = 0
        for n in range(2, self.b.n_max + 1):
            for m in range(2, self.b.n_max + 1):
                lo = min(n, m)
                for x in self.b.M[lo]:
                    count += 1
                    if self.b.psi(n, self.b.psi(m, x)) != self.b.psi(lo, x):
                        return self._res("Psi_n o Psi_m = Psi_min", "exact", "mismatch", False, count, (n, m, x))
        return self._res("Psi_n o Psi_m = Psi_min(n,m) on M_min(n,m)", "exact", "equal", True, count)

    def blocks_factorization(self):
        count = 0
        for n in range(2, self.b.n_max + 1):
            for x in self.b.points:
                count += 1
                lhs = self.b.phi(n - 1, x)
                if self.b.phi(n - 1, self.b.psi(n, self.b.phi(n, x))) != lhs:
                    return self._res("phi_{n-1} = phi_{n-1} Psi_n phi_n", "exact", "mismatch", False, count, (n, x))
        return self._res("phi_{n-1} = phi_{n-1} o Psi_n o phi_n on M", "exact", "equal", True, count)

    # -- fine-retractions --------------------------------------------------------

    def _e_stages(self, pairwise=False):
        top = self.V if pairwise else self.b.n_max
        return range(2, top + 1)

    def _g_stages(self, pairwise=False):
        top = self.V - 1 if pairwise else self.b.n_max - 1
        return [n for n in range(1, top + 1) if n in self.b.D]

    def fine_shell_order(self):
        ok, count = True, 0
        for n in self._e_stages():
            o = self.f.shell_order(n)
            count += len(o)
            dim = o.dim
            ok &= o.ys[0] == (0,) * dim and len(set(o.ys)) == len(o.ys)
            ok &= all(o.norms[j] <= o.norms[j + 1] for j in range(len(o) - 1))
            for m in range(1, o.max_shell + 1):
                shell = [y for y in o.ys if t_norm(y) == m]
                ok &= len(shell) == (2 * m + 1) ** dim - (2 * m - 1) ** dim
                ok &= shell == sorted(shell)
        return self._res("shell order is complete, duplicate-free, norm-monotone, starts at 0",
                         "exact", "ok" if ok else "violation", ok, count)

    def fine_m_bounds(self):
        worst_lo, worst_hi, count, wit = None, None, 0, None
        ok = True
        for n in self._e_stages():
            o = self.f.shell_order(n)
            for j2 in range(1, len(o)):
                for j1 in range(j2):
                    m = o.m_value(j1, j2)
                    count += 1
                    lo, hi = m - (o.norms[j1] - 1), o.norms[j1] - m
                    worst_lo = lo if worst_lo is None else min(worst_lo, lo)
                    worst_hi = hi if worst_hi is None else min(worst_hi, hi)
                    if lo < 0 or hi < 0:
                        ok, wit = False, (n, j1, j2, m)
        return self._res("||y_j1|| - 1 <= m(j2, j1) <= ||y_j1||", "both margins >= 0",
                         f"margins {worst_lo}/{worst_hi}", ok, count, wit)

    def fine_local_composition(self):
        count = 0
        for n in self._e_stages():
            o = self.f.shell_order(n)
            for j2 in range(1, len(o)):
                dom = o.ys[: j2 + 1]
                for j1 in range(j2, len(o)):
                    for y in dom:
                        count += 1
                        t2 = o.local(j2, y)
                        if o.local(j1, t2) != t2:
                            return self._res("T_j1 T_j2 = T_j2", "exact", "mismatch", False, count, (n, j1, j2, y))
        for n in self._e_stages(pairwise=True):
            e = self.f.E(n)
            base = list(e.d)
            for i2 in range(1, e.size + 1):
                dom = base + e.x[:i2]
                for i1 in range(i2, e.size + 1):
                    for x in dom:
                        count += 1
                        p2 = self.f.local_psi(n, i2, x)
                        if self.f.local_psi(n, i1, p2) != p2:
                            return self._res("psi_i1 psi_i2 = psi_i2", "exact", "mismatch", False, count, (n, i1, i2, x))
        return self._res("T_j1 o T_j2 = T_j2 and psi_i1 o psi_i2 = psi_i2 for j1 >= j2, i1 >= i2",
                         "exact", "equal", True, count)

    def fine_E_bijection(self):
        ok, count = True, 0
        for n in self._e_stages():
            e = self.f.E(n)
            count += e.size
            expected = set(self.b.M[n]) - set(self.b.D[n - 1])
            ok &= len(set(e.x)) == e.size and set(e.x) == expected
            ok &= all(p < q for p, q in zip(e.pairs, e.pairs[1:]))
            ok &= all(self.f.x_point(n, 0, k) == e.d[k - 1] for k in range(1, len(e.d) + 1))
        return self._res("i -> x^n_i is a bijection onto M_n minus D_{n-1}; E(n) lexicographic; K(0,n) is everything",
                         "exact", "ok" if ok else "violation", ok, count)

    def fine_Psi_commutation(self):
        count, ok, wit = 0, True, None
        for n in self._e_stages(pairwise=True):
            T = self.con.psi_tables(n)
            good, w, c = _commutation(T[:-1])
            count += c
            if not good:
                ok, wit = False, (n,) + w
                break
            pts = self.b.M[n]
            pos = {p: t for t, p in enumerate(pts)}
            for i in range(len(T)):
                for t, x in enumerate(pts):
                    count += 1
                    if pos[self.f.Psi_literal(n, i, x)] != T[i][t]:
                        ok, wit = False, ("literal", n, i, x)
                        break
        return self._res("Psi_{n,i1} o Psi_{n,i2} = Psi_{n,min}; fast path equals literal composition",
                         "exact", "equal" if ok else "mismatch", ok, count, wit)

    def fine_Psi_anchor(self):
        count = 0
        for n in self._e_stages():
            for x in self.b.M[n]:
                count += 1
                if self.f.Psi(n, 0, x) != self.b.psi(n, x):
                    return self._res("Psi_{n,0} = Psi_n", "exact", "mismatch", False, count, (n, x))
        return self._res("Psi_{n,0} = Psi_n on M_n", "exact", "equal", True, count)

    def fine_closed_form(self):
        count = 0
        for n in self._e_stages(pairwise=True):
            e = self.f.E(n)
            for i2 in range(1, e.size + 1):
                x = e.x[i2 - 1]
                # one downward sweep yields Psi_{n,i1}(x) for every i1 < i2
                y = x
                for l in range(e.size, i2 - 1, -1):
                    y = self.f.local_psi(n, l, y)
                for i1 in range(i2 - 1, 0, -1):
                    count += 1
                    if y != self.f.Psi_closed_form(n, i1, i2):
                        return self._res("closed form with radius M(i1,i2)", "exact", "mismatch",
                                         False, count, (n, i1, i2))
                    y = self.f.local_psi(n, i1, y)
        return self._res("Psi_{n,i1}(x_i2) equals the truncation by M(i1,i2) for all i1 < i2",
                         "exact", "equal", True, count)

    def fine_big_M_bounds(self):
        worst, count, wit = None, 0, None
        for n in self._e_stages(pairwise=True):
            e = self.f.E(n)
            norms = e.order.norms
            for i2 in range(1, e.size + 1):
                for i1 in range(1, i2):
                    count += 1
                    big = self.f.big_M(n, i1, i2)
                    y1 = norms[e.pairs[i1 - 1][0]]
                    margin = min(big - (y1 - 2), y1 - big)
                    if worst is None or margin < worst:
                        worst, wit = margin, (n, i1, i2, big)
        ok = worst is None or worst >= 0
        return self._res("||y_j1|| - 2 <= M(i1,i2) <= ||y_j1||", "margin >= 0", str(worst),
                         ok, count, wit)

    def fine_Psi_lipschitz(self):
        lam = self.lam
        bound = (3 * lam + 2) * (3 * lam**2 + 6 * lam + 11)
        maps = []
        for n in self._e_stages(pairwise=True):
            T = self.con.psi_tables(n)
            met = self.con.block_metric("M", n)
            maps += [((n, i), met, T[i], met) for i in range(len(T))]
        (worst, label, pair), count = _lipschitz_max(maps)
        return self._res("Psi_{n,i} is (3 lambda+2)(3 lambda^2+6 lambda+11)-Lipschitz", bound,
                         _q(worst), worst <= bound, count, (label, pair), margin=_margin(bound, worst),
                         maps=len(maps))

    def fine_G_order(self):
        ok, count = True, 0
        for n in self._g_stages():
            g = self.f.G(n)
            count += g.size
            norms = [t_norm(z) for z in g.z]
            ok &= all(a <= b for a, b in zip(norms, norms[1:]))
            ok &= set(g.c) == set(self.b.C[n]) and len(set(g.c)) == g.size
            k = self.b.k(n)
            ok &= all(c[:k] == z for c, z in zip(g.c, g.z))
            ok &= all(self.sys.s(n) < v <= self.sys.s(n + 1) for v in norms)
        return self._res("G(n) is a norm-monotone bijection onto C_n", "exact",
                         "ok" if ok else "violation", ok, count)

    def fine_phi_commutation(self):
        count, ok, wit = 0, True, None
        for n in self._g_stages(pairwise=True):
            T = self.con.phi_tables(n)
            good, w, c = _commutation(T[:-1])
            count += c
            if not good:
                ok, wit = False, (n,) + w
                break
            pts = self.b.D[n]
            pos = {p: t for t, p in enumerate(pts)}
            for i in range(len(T)):
                for t, x in enumerate(pts):
                    count += 1
                    if pos[self.f.phi_literal(n, i, x)] != T[i][t]:
                        ok, wit = False, ("literal", n, i, x)
                        break
        return self._res("phi_{n,i1} o phi_{n,i2} = phi_{n,min}; fast path equals literal composition",
                         "exact", "equal" if ok else "mismatch", ok, count, wit)

    def fine_phi_anchor(self):
        count = 0
        for n in self._g_stages():
            for x in self.b.D[n]:
                count += 1
                if self.f.phi(n, 0, x) != self.b.phi(n, x):
                    return self._res("phi_{n,0} = phi_n|D_n", "exact", "mismatch", False, count, (n, x))
        return self._res("phi_{n,0} = phi_n restricted to D_n", "exact", "equal", True, count)

    def fine_phi_closed_form(self):
        count = 0
        for n in self._g_stages(pairwise=True):
            k = self.b.k(n)
            for i in range(self.f.G(n).size):
                for x in self.b.D[n]:
                    count += 1
                    lhs = self.f.phi_literal(n, i, x)
                    rhs = self.b.r_D[n][t_truncate(x[:k], t_norm(lhs[:k]))]
                    if lhs != rhs:
                        return self._res("phi_{n,i} closed form", "exact", "mismatch", False, count, (n, i, x))
        return self._res("phi_{n,i}(x) = (r_n|D_n)^-1 T_{||r_n phi_{n,i}(x)||}(r_n x)", "exact",
                         "equal", True, count)

    def fine_sandwich(self):
        worst, count, wit = None, 0, None
        for n in self._g_stages():
            g, k = self.f.G(n), self.b.k(n)
            for i in range(1, g.size + 1):
                zi = t_norm(g.z[i - 1])
                for x in self.b.D[n]:
                    count += 1
                    r = t_norm(self.f.phi(n, i, x)[:k])
                    margin = min(zi - r, r - min(t_norm(x[:k]), zi - 1))
                    if worst is None or margin < worst:
                        worst, wit = margin, (n, i, x)
        ok = worst is None or worst >= 0
        return self._res("||z_i|| >= ||r_n phi_{n,i}(x)|| >= min(||r_n x||, ||z_i|| - 1), i >= 1",
                         "margin >= 0", str(worst), ok, count, wit)

    def fine_phi_lipschitz(self):
        lam = self.lam
        bound = 2 * lam**2 + 4 * lam + 4
        maps = []
        for n in self._g_stages(pairwise=True):
            T = self.con.phi_tables(n)
            met = self.con.block_metric("D", n)
            maps += [((n, i), met, T[i], met) for i in range(len(T))]
        (worst, label, pair), count = _lipschitz_max(maps)
        return self._res("phi_{n,i} is (2 lambda^2+4 lambda+4)-Lipschitz", bound, _q(worst),
                         worst <= bound, count, (label, pair), margin=_margin(bound, worst), maps=len(maps))

    # -- basis-assembly ------------------------------------------------------------

    def basis_order(self):
        o = self.con.basis.order
        b = self.b
        ok = len(o.index) == len(o.points) == len(b.M[self.V])
        ok &= o.points[0] == (0,) * self.sys.dim
        for kind, n, first, last in o.segments:
            seg = set(o.points[first - 1: last])
            if kind == "M1":
                ok &= (first, last) == (1, len(b.M[1])) and seg == set(b.M[1])
            elif kind == "C":
                ok &= (first, last) == (len(b.M[n]) + 1, len(b.D[n])) and seg == set(b.C[n])
            else:
                ok &= (first, last) == (len(b.D[n - 1]) + 1, len(b.M[n]))
                ok &= seg == set(b.M[n]) - set(b.D[n - 1])
        return self._res("I is a bijection with the segment rules and I^-1(1) = 0", "exact",
                         "ok" if ok else "violation", ok, len(o.points),
                         segments=[list(s) for s in o.segments])

    def basis_commutation(self):
        T = self.con.tables
        ok, wit, count = _commutation(T)
        # each varphi_i is a retraction onto the first i points
        for i in range(1, len(T) + 1):
            row = T[i - 1]
            if row.max() >= i or (row[:i] != np.arange(i)).any():
                ok, wit = False, ("not a retraction onto M^i", i)
                break
        return self._res("varphi_i1 o varphi_i2 = varphi_min and varphi_i retracts onto M^i",
                         "exact", "equal" if ok else "mismatch", ok, count, wit)

    def lipschitz_by_index(self) -> list[Fraction]:
        if self._lip_by_index is None:
            met = self.con.metric
            self._lip_by_index = [indexed_lipschitz(met, row, met)[0] for row in self.con.tables]
        return self._lip_by_index

    def basis_lipschitz(self):
        bound = k_global(self.lam)
        lips = self.lipschitz_by_index()
        worst = max(lips)
        i = lips.index(worst) + 1
        n = len(self.con.points)
        return self._res("varphi_i is K_global-Lipschitz", bound, _q(worst), worst <= bound,
                         len(lips) * n * (n - 1) // 2, f"i={i}", margin=_margin(bound, worst),
                         K_observed=_q(worst))

    def basis_rho(self):
        worst, wit = Fraction(0), None
        for m in self.b.points:
            d = Fraction(t_dist(project_rho(self.b, m), m))
            if d > worst:
                worst, wit = d, m
        return self._res("||m - rho(m)|| <= 1", 1, _q(worst), worst <= 1, len(self.b.points), wit)

    def _nearest(self, sample, targets):
        """Largest distance from a sample point to its nearest target, exactly."""
        both = PointMetric(list(sample) + list(targets))
        dist = both.dist[: len(sample), len(sample):]
        near = dist.min(axis=1)
        t = int(near.argmax())
        return Fraction(int(near[t]), both.scale), sample[t]

    def basis_density(self):
        sample = ambient_sample(self.b, self.V, self.s.density_step)
        worst, wit = self._nearest(sample, self.con.points)
        rho_worst, _ = self._nearest(sample, sorted({project_rho(self.b, m) for m in self.con.points}))
        bound = 2 * self.lam + 2
        ok = worst <= bound and rho_worst <= bound + 1
        return self._res("every ambient sample point is within 2 lambda+2 of M (2 lambda+3 of rho(M))",
                         bound, _q(worst), ok, len(sample), wit, rho_worst=_q(rho_worst),
                         margin=_margin(bound, worst))

    # -- net ----------------------------------------------------------------

    def net(self):
        if self._net is None:
            eq = extract_net(self.con.basis, self.s.a)
            self._net = perturb(eq, self.con.metric)
        return self._net

    def net_certificate(self):
        eq = self.net()
        a = eq.a
        reps_ok = all(t_dist(p, q) > a for p, q in itertools.combinations(eq.reps, 2))
        cover_ok = all(t_dist(p, eq.reps[k]) <= a for k, cl in enumerate(eq.clusters) for p in cl)
        netm = PointMetric(eq.net)
        d = netm.dist + np.eye(len(eq.net), dtype=np.int64) * (10**12)
        sep = Fraction(int(d.min()), netm.scale) if len(eq.net) > 1 else None
        sample = ambient_sample(self.b, self.V, self.s.density_step)
        dens, wit = self._nearest(sample, eq.net)
        disp = max(Fraction(t_dist(m, u)) for m, u in zip(eq.points, eq.net))
        D = eq.distortion
        ok = (reps_ok and cover_ok and (sep is None or sep >= a / 4) and dens <= eq.density_bound
              and disp <= eq.displacement_bound and D > 0)
        return self._res(
            "N is (a/4)-separated and (b+3a/8)-dense; ||mu(m)-m|| <= a+1+3a/8; distortion finite",
            f"sep>={_q(a / 4)}, dense<={_q(eq.density_bound)}, disp<={_q(eq.displacement_bound)}",
            f"sep={_q(sep)}, dense={_q(dens)}, disp={_q(disp)}", ok,
            len(eq.net) * (len(eq.net) - 1) // 2 + len(sample), wit,
            a=_q(a), b=_q(eq.b), clusters=len(eq.clusters), reps_separated=reps_ok,
            lip_mu=_q(eq.lip_forward), lip_mu_inv=_q(eq.lip_backward), distortion=_q(D),
        )

    def net_transfer(self):
        eq = self.net()
        moved = transfer_basis(self.con.tables)
        ok, wit, count = _commutation(moved)
        netm = PointMetric(eq.net)
        D = eq.distortion
        lips = self.lipschitz_by_index()
        worst_ratio, worst = Fraction(0), Fraction(0)
        for i, row in enumerate(moved):
            value, _ = indexed_lipschitz(netm, row, netm)
            worst = max(worst, value)
            if value > D * lips[i]:
                ok, wit = False, ("constant above D*K", i + 1)
            if lips[i]:
                worst_ratio = max(worst_ratio, value / lips[i])
        bound = D * k_global(self.lam)
        ok &= worst <= bound
        return self._res("transferred retractions commute and are (D*K)-Lipschitz", _q(bound),
                         _q(worst), ok, count, wit, distortion=_q(D), worst_ratio_to_K=_q(worst_ratio))

    # -- free space --------------------------------------------------------------

    def free_data(self):
        if self._free is None:
            con, s = self.con, self.s
            metric = FiniteMetric(con.metric, base=0)
            mols = sample_molecules(len(con.points), s.seed, s.elementary, s.pairs, s.combos)
            idx = prefix_indices(len(con.points), con.basis.order.boundaries(), s.prefix_count)
            rows, results = basis_check(metric, con.tables, mols, idx, s.workers)
            self._free = (metric, mols, idx, rows, results)
        return self._free

    def free_duality(self):
        metric, mols, _, _, results = self.free_data()
        ok = all(r.certified and r.value == r.dual_value for r in results)
        cross = 0
        for m in mols:
            if 0 < len(m) <= self.s.cross_check_max:
                cross += 1
                if dual_lp_norm(metric, m) != free_norm(metric, m).value:
                    ok = False
        return self._res("transport value = dual LP value on every solve", "exact",
                         "equal" if ok else "gap", ok, len(results), cross_checked=cross)

    def free_elementary(self):
        metric = self.free_data()[0]
        n = len(metric)
        ok, count = True, 0
        for x in range(1, min(n, 21)):
            count += 1
            ok &= free_norm(metric, {x: 1}).value == metric.d(x, 0)
        for x, y in sample_pairs(n, self.s.seed, 20):
            count += 1
            ok &= free_norm(metric, {x: 1, y: -1}).value == metric.d(x, y)
        return self._res("||delta_x|| = d(x,0) and ||delta_x - delta_y|| = d(x,y)", "exact",
                         "equal" if ok else "mismatch", ok, count)

    def free_axioms(self):
        metric, mols, *_ = self.free_data()
        rng = random.Random(self.s.seed + 7)
        ok, count = True, 0
        for m in mols[:20]:
            q = Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.randint(1, 3))
            count += 1
            ok &= free_norm(metric, m.scaled(q)).value == abs(q) * free_norm(metric, m).value
        for m1, m2 in zip(mols[::3], mols[1::3]):
            count += 1
            ok &= free_norm(metric, m1 + m2).value <= free_norm(metric, m1).value + free_norm(metric, m2).value
        return self._res("homogeneity and triangle inequality on samples", "exact",
                         "ok" if ok else "violation", ok, count)

    def free_pushforward(self):
        _, _, _, rows, _ = self.free_data()
        lips = self.lipschitz_by_index()
        worst, ok = Fraction(0), True
        for r in rows:
            if r.norm:
                ratio = r.projected / r.norm
                worst = max(worst, ratio / lips[r.index - 1] if lips[r.index - 1] else ratio)
            ok &= r.projected <= lips[r.index - 1] * r.norm
        return self._res("||T m|| <= Lip(T) ||m|| for each sampled retraction", "ratio <= 1",
                         _q(worst), ok, len(rows))

    def free_projection(self):
        _, mols, idx, rows, _ = self.free_data()
        K = k_global(self.lam)
        worst = max((r.ratio for r in rows if r.ratio is not None), default=Fraction(0))
        ok = all(r.projected <= K * r.norm for r in rows)
        ok &= len(mols) >= 50 and len(idx) >= 10
        return self._res("||P_i m|| <= K_global ||m||", K, _q(worst), ok, len(rows),
                         molecules=len(mols), indices=idx, margin=_margin(K, worst))

    def free_projection_commutation(self):
        metric, mols, idx, _, _ = self.free_data()
        T = self.con.tables
        count = 0
        for m in mols:
            for i1, i2 in itertools.product(idx, idx):
                count += 1
                two = pushforward(T[i1 - 1], pushforward(T[i2 - 1], m))
                if two != pushforward(T[min(i1, i2) - 1], m):
                    return self._res("P_i1 P_i2 = P_min", "exact", "mismatch", False, count, (i1, i2))
        return self._res("P_i1 P_i2 = P_min(i1,i2) on sampled molecules", "exact", "equal", True, count)

    def free_residual(self):
        _, mols, idx, rows, _ = self.free_data()
        top = max(idx)
        final = [r for r in rows if r.index == top]
        ok = all(r.residual == 0 for r in final) and top == len(self.con.points)
        by_mol: dict[int, list] = {}
        for r in rows:
            by_mol.setdefault(r.molecule, []).append((r.index, r.residual))
        monotone = sum(
            all(a[1] >= b[1] for a, b in zip(sorted(v), sorted(v)[1:])) for v in by_mol.values())
        return self._res("||P_#M m - m|| = 0", 0, _q(max((r.residual for r in final), default=0)),
                         ok, len(final), monotone_molecules=f"{monotone}/{len(by_mol)}")
