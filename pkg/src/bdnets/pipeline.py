"""Run configuration, orchestration and deterministic exports.

A run writes plain CSV tables (rationals as "p/q") and one ``summary.json``.
Nothing time- or host-dependent goes into either, so two runs with the same
config produce the same bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from bdnets.blocks import DEFAULT_CAP
from bdnets.construction import Construction
from bdnets.fine import DEFAULT_SHELL_CAP
from bdnets.linf import format_rational, parse_rational
from bdnets.system import ConfigError, build_system
from bdnets.verify import Settings, SuiteResult, Verifier

log = logging.getLogger("bdnets")

OUTPUT_ENV = "BDNETS_OUT"
COMMANDS = ("build", "order", "verify", "net", "export", "run")

_TOP_KEYS = {"system", "caps", "a", "verify_stage", "samples", "seed", "output", "suites",
             "workers", "m1_rule"}
_SAMPLE_KEYS = {"elementary", "pairs", "combos", "prefix_count", "cross_check_max",
                "linf_samples", "sample_cap", "density_step"}


@dataclass
class RunConfig:
    system: dict
    max_block: int = DEFAULT_CAP
    max_shell: int = DEFAULT_SHELL_CAP
    a: Fraction = Fraction(2)
    verify_stage: int | None = None
    seed: int = 0
    output: str = "bdnets-out"
    # None runs every suite; an empty list is a build-only run
    suites: list[str] | None = None
    workers: int = 1
    m1_rule: str = "repaired"
    samples: dict = field(default_factory=dict)

    def settings(self) -> Settings:
        s = Settings(seed=self.seed, a=self.a, workers=self.workers)
        for key, value in self.samples.items():
            setattr(s, key, value)
        return s

    def output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output)

    def normalized(self) -> dict:
        out = asdict(self)
        out["a"] = format_rational(self.a)
        out["samples"] = {k: format_rational(v) if isinstance(v, Fraction) else v
                          for k, v in sorted(self.samples.items())}
        del out["output"]
        return out


def _positive_int(raw, where: str) -> int:
    if not isinstance(raw, int) or isinstance(raw, bool) or raw <= 0:
        raise ConfigError(where, f"must be a positive integer, got {raw!r}")
    return raw


def parse_config(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    if not isinstance(data.get("system"), dict):
        raise ConfigError("system", "missing or not an object")
    cfg = RunConfig(system=data["system"])
    caps = data.get("caps", {})
    if not isinstance(caps, dict):
        raise ConfigError("caps", "must be an object")
    for key in caps:
        if key not in ("max_block", "max_shell"):
            raise ConfigError(f"caps.{key}", "unknown field")
    cfg.max_block = _positive_int(caps.get("max_block", DEFAULT_CAP), "caps.max_block")
    cfg.max_shell = _positive_int(caps.get("max_shell", DEFAULT_SHELL_CAP), "caps.max_shell")
    try:
        cfg.a = parse_rational(data.get("a", 2))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError("a", str(exc)) from None
    if cfg.a <= 1:
        raise ConfigError("a", f"must exceed 1, got {format_rational(cfg.a)}")
    if data.get("verify_stage") is not None:
        cfg.verify_stage = _positive_int(data["verify_stage"], "verify_stage")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed", "must be an integer")
    cfg.seed = seed
    out = data.get("output", cfg.output)
    if not isinstance(out, str) or not out:
        raise ConfigError("output", "must be a non-empty path string")
    cfg.output = out
    suites = data.get("suites")
    if suites is not None and (not isinstance(suites, list) or not all(isinstance(s, str) for s in suites)):
        raise ConfigError("suites", "must be a list of suite or group names")
    cfg.suites = suites
    cfg.workers = _positive_int(data.get("workers", 1), "workers")
    rule = data.get("m1_rule", cfg.m1_rule)
    if rule not in ("repaired", "literal"):
        raise ConfigError("m1_rule", f"must be 'repaired' or 'literal', got {rule!r}")
    cfg.m1_rule = rule
    samples = data.get("samples", {})
    if not isinstance(samples, dict):
        raise ConfigError("samples", "must be an object")
    for key, value in samples.items():
        where = f"samples.{key}"
        if key not in _SAMPLE_KEYS:
            raise ConfigError(where, "unknown field")
        if key == "density_step":
            try:
                value = parse_rational(value)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(where, str(exc)) from None
            if value <= 0:
                raise ConfigError(where, "must be positive")
        else:
            value = _positive_int(value, where)
        cfg.samples[key] = value
    return cfg


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    return parse_config(data)


# -- exports -------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (Fraction, int)) and not isinstance(v, bool):
        return format_rational(v)
    return str(v)


def write_table(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _coords(prefix: str, dim: int) -> list[str]:
    return [f"{prefix}{g}" for g in range(dim)]


class Run:
    """One pipeline execution; each step writes its own tables."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = cfg.output_dir()
        self.sys = build_system(cfg.system)
        stage = cfg.verify_stage or self.sys.n_max
        if stage > self.sys.n_max:
            raise ConfigError("verify_stage", f"must be at most n_max = {self.sys.n_max}")
        self.con = Construction(self.sys, stage, cfg.max_block, cfg.max_shell, cfg.m1_rule)
        self.verifier = Verifier(self.con, cfg.settings())
        self.files: list[str] = []
        self.results: list[SuiteResult] = []

    def _write(self, name: str, header, rows) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        write_table(self.out / name, header, rows)
        if name not in self.files:
            self.files.append(name)

    def export_blocks(self):
        dim = self.sys.dim
        self._write("blocks.csv", ["stage", "block"] + _coords("x", dim), self.con.blocks.export_rows())

    def export_order(self):
        order = self.con.basis.order
        dim = self.sys.dim
        rows = []
        for kind, n, first, last in order.segments:
            for i in range(first, last + 1):
                rows.append((i, kind, n, *order.points[i - 1]))
        self._write("order.csv", ["i", "segment", "stage"] + _coords("x", dim), rows)

    def export_fine(self):
        f, b = self.con.fine, self.con.blocks
        for n in range(2, b.n_max + 1):
            self._write(f"E_{n}.csv", ["i", "j", "k"], f.export_E(n))
        for n in sorted(b.D):
            self._write(f"G_{n}.csv", ["i", "shell"] + _coords("z", b.k(n)), f.export_G(n))

    def export_net(self):
        eq = self.verifier.net()
        order = self.con.basis.order
        dim = self.sys.dim
        rows = [(t + 1, eq.cluster_of[t] + 1, eq.slot[t], *m, *u)
                for t, (m, u) in enumerate(zip(order.points, eq.net))]
        self._write("net.csv", ["i", "cluster", "slot"] + _coords("m", dim) + _coords("mu", dim), rows)

    def export_free(self):
        _, mols, _, rows, _ = self.verifier.free_data()
        self._write("molecules.csv", ["molecule", "point", "coefficient"],
                    [(t, x, a) for t, m in enumerate(mols) for x, a in sorted(m.items())])
        self._write("free_report.csv", ["molecule", "i", "norm", "projected", "ratio", "residual"],
                    [(r.molecule, r.index, r.norm, r.projected,
                      "-" if r.ratio is None else r.ratio, r.residual) for r in rows])

    def verify(self, selection) -> list[SuiteResult]:
        results = []
        for name in self._names(selection):
            t0 = time.perf_counter()
            res = self.verifier.run([name])[0]
            log.info("%s (%.2fs)", res.line(), time.perf_counter() - t0)
            results.append(res)
        self.results += results
        return results

    def _names(self, selection):
        try:
            return self.verifier.select(selection)
        except ValueError as exc:
            raise ConfigError("suites", str(exc)) from None

    def summary(self, command: str) -> dict:
        b = self.con.blocks
        hashes = {name: hashlib.sha256((self.out / name).read_bytes()).hexdigest()
                  for name in sorted(self.files)}
        return {
            "command": command,
            "config": self.cfg.normalized(),
            "lambda_bar": self.sys.lambda_bar,
            "n_max": self.sys.n_max,
            "verify_stage": self.con.stage,
            "sizes": {
                "M": {str(n): len(p) for n, p in sorted(b.M.items())},
                "C": {str(n): len(p) for n, p in sorted(b.C.items())},
                "D": {str(n): len(p) for n, p in sorted(b.D.items())},
                "E": {str(n): self.con.fine.E(n).size for n in range(2, b.n_max + 1)},
            },
            "suites": [r.as_dict() for r in self.results],
            "passed": all(r.passed for r in self.results),
            "exports": hashes,
        }

    def write_summary(self, command: str) -> dict:
        doc = self.summary(command)
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / "summary.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return doc


def run_pipeline(cfg: RunConfig, command: str = "run") -> tuple[int, dict]:
    """Execute ``command`` and return (exit status, summary)."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    run = Run(cfg)
    if command in ("build", "export", "run"):
        run.export_blocks()
    if command in ("order", "export", "run"):
        run.export_order()
    if command in ("export", "run"):
        run.export_fine()
    if command in ("net", "export", "run"):
        run.export_net()
    if command in ("export", "run"):
        run.export_free()
    if command == "net":
        run.verify(["net"])
    elif command in ("verify", "run"):
        run.verify(cfg.suites)
    doc = run.write_summary(command)
    return (0 if doc["passed"] else 1), doc
