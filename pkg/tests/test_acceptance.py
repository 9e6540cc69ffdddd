"""Acceptance gate on the reference configuration P0.

P0: zero preset, stage sizes (1, 2, 3), lambda_bar = 2, N_max = 3, a = 2.
Pairwise and composition suites run on M_2 (81 points). Every comparison is
exact. Each criterion prints one PASS/FAIL line to the terminal.
"""

import itertools
import json
import time

import pytest

from bdnets.construction import Construction
from bdnets.pipeline import parse_config, run_pipeline
from bdnets.system import build_system
from bdnets.verify import Settings, Verifier

from conftest import P0

LAM = 2


@pytest.fixture(scope="module")
def verifier():
    con = Construction(build_system(P0), stage=2)
    return Verifier(con, Settings(seed=0, a=2))


def report(capsys, number, title, ok, elapsed, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({elapsed:.2f}s){' ' + detail if detail else ''}"
    with capsys.disabled():
        print("\n" + line)


def run_suites(v, names):
    t0 = time.perf_counter()
    results = v.run(names)
    return results, time.perf_counter() - t0


def failed(results):
    return [f"{r.name} worst={r.worst} witness={r.witness}" for r in results if not r.passed]


def test_criterion_1_compatibility(verifier, capsys):
    results, dt = run_suites(verifier, ["bd.compatibility", "bd.extension_property"])
    ok = all(r.passed for r in results) and dt < 1
    report(capsys, 1, "compatibility and extension property", ok, dt,
           f"{sum(r.checked for r in results)} checks")
    assert not failed(results), failed(results)
    assert dt < 1


def test_criterion_2_block_identification(verifier, capsys):
    t0 = time.perf_counter()
    b = verifier.b
    # independent count of integer sup-norm balls and shells
    ball = lambda k, r: sum(1 for _ in itertools.product(range(-r, r + 1), repeat=k))
    counts_ok = (len(b.M[1]) == 5 == ball(1, 2) and len(b.M[2]) == 81 == ball(2, 4)
                 and len(b.C[1]) == 4 == ball(1, 4) - ball(1, 2))
    results = verifier.run(["blocks.inverse_M", "blocks.inverse_D", "blocks.c_placement"])
    bij = all(r.passed for r in results)
    dt = time.perf_counter() - t0
    ok = counts_ok and bij and dt < 1
    report(capsys, 2, "block identification #M_1=5, #M_2=81, #C_1=4", ok, dt)
    assert counts_ok
    assert not failed(results), failed(results)
    assert dt < 1


def test_criterion_3_lipschitz(verifier, capsys):
    names = ["blocks.inverse_M", "blocks.inverse_D", "blocks.phi_ladder", "fine.Psi_lipschitz",
             "fine.phi_lipschitz", "basis.lipschitz"]
    results, dt = run_suites(verifier, names)
    bounds = {r.name: r.bound for r in results}
    assert bounds == {
        "blocks.inverse_M": str(3 * LAM + 2),
        "blocks.inverse_D": str(LAM**2 + 2 * LAM + 2),
        "blocks.phi_ladder": str(3 * LAM + 2),
        "fine.Psi_lipschitz": str((3 * LAM + 2) * (3 * LAM**2 + 6 * LAM + 11)),
        "fine.phi_lipschitz": str(2 * LAM**2 + 4 * LAM + 4),
        "basis.lipschitz": "2240",
    }
    ok = all(r.passed for r in results) and dt < 60
    worst = ", ".join(f"{r.name}={r.worst}" for r in results)
    report(capsys, 3, "exhaustive Lipschitz certificates", ok, dt, worst)
    assert not failed(results), failed(results)
    assert dt < 60


def test_criterion_4_commutation(verifier, capsys):
    names = ["blocks.phi_ladder", "blocks.psi_commutation", "fine.Psi_commutation",
             "fine.phi_commutation", "basis.commutation"]
    results, dt = run_suites(verifier, names)
    ok = all(r.passed for r in results) and dt < 120
    report(capsys, 4, "commutation laws on every realized point", ok, dt,
           f"{sum(r.checked for r in results)} checks")
    assert not failed(results), failed(results)
    assert dt < 120


def test_criterion_5_anchors(verifier, capsys):
    names = ["fine.Psi_anchor", "fine.phi_anchor", "fine.closed_form", "fine.m_bounds", "fine.big_M_bounds"]
    results, dt = run_suites(verifier, names)
    ok = all(r.passed for r in results) and dt < 30
    report(capsys, 5, "anchor identities, closed form and sandwich bounds", ok, dt)
    assert not failed(results), failed(results)
    assert dt < 30


def test_criterion_6_factorization(verifier, capsys):
    results, dt = run_suites(verifier, ["blocks.factorization"])
    ok = results[0].passed and dt < 5
    report(capsys, 6, "phi_{n-1} = phi_{n-1} Psi_n phi_n", ok, dt, f"{results[0].checked} points")
    assert not failed(results), failed(results)
    assert dt < 5


def test_criterion_7_net(verifier, capsys):
    results, dt = run_suites(verifier, ["net.certificate", "net.transfer"])
    cert = results[0].notes
    assert cert["a"] == "2" and cert["b"] == str(2 + 2 * LAM + 3)
    ok = all(r.passed for r in results) and dt < 60
    report(capsys, 7, "net certificate and transferred basis", ok, dt,
           f"{results[0].worst}, D={cert['distortion']}")
    assert not failed(results), failed(results)
    assert dt < 60


def test_criterion_8_free_space(verifier, capsys):
    names = ["free.strong_duality", "free.elementary", "free.projection_bound", "free.residual"]
    results, dt = run_suites(verifier, names)
    proj = next(r for r in results if r.name == "free.projection_bound")
    assert proj.notes["molecules"] >= 50 and len(proj.notes["indices"]) >= 10
    elem = next(r for r in results if r.name == "free.elementary")
    assert elem.checked >= 40
    ok = all(r.passed for r in results) and dt < 300
    report(capsys, 8, "free-space norms, projections and residuals", ok, dt,
           f"max ||P_i m||/||m|| = {proj.worst}")
    assert not failed(results), failed(results)
    assert dt < 300


def test_criterion_9_determinism(tmp_path, capsys):
    doc = {"system": dict(P0), "verify_stage": 2, "a": "2", "seed": 0}
    outs = []
    t0 = time.perf_counter()
    for tag in ("first", "second"):
        out = tmp_path / tag
        cfg = parse_config({**doc, "output": str(out)})
        status, summary = run_pipeline(cfg, "run")
        assert status == 0
        outs.append(out)
    dt = time.perf_counter() - t0
    files = sorted(p.name for p in outs[0].iterdir())
    same = files == sorted(p.name for p in outs[1].iterdir()) and all(
        (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
    summary = json.loads((outs[0] / "summary.json").read_text())
    ok = same and summary["passed"]
    report(capsys, 9, "byte-identical exports across two runs", ok, dt, f"{len(files)} files")
    assert same
    assert summary["passed"]
