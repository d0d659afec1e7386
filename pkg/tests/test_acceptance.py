"""Acceptance gate: one test per criterion, each recorded as a pass/fail line.

Every criterion runs at its pinned tolerance; the lines are printed in the
"acceptance criteria" section of the terminal summary.
"""
import math

import numpy as np

from conftest import FIXTURES, calibrated, frame, report, solution, spec_of
from reflow import build_lagrangian_pair, build_space_form_pair, cli, geom
from reflow.liecore import check_bracket_relations, decompose, lie_triple_residual, project, random_element, \
    rank_oracle
from reflow.loops import GridChart, load_connection, r_lambda
from reflow.zerocurv import RankObstruction, closed_form_frame, commuting_vacuum, integrate_frame, \
    local_solution, mc_residual, path_independence_residual, vacuum_solution


def record(log, number, title, checks):
    """checks: list of (label, value, ok).  Logs one line, then asserts."""
    ok = all(c[2] for c in checks)
    failed = [f"{label}={value}" for label, value, good in checks if not good]
    worst = "; ".join(failed) if failed else f"{len(checks)} checks"
    log.append(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {worst}")
    assert ok, failed


def _all_specs():
    for hyp in (False, True):
        for n, k in ((2, 1), (2, 2), (3, 2)):
            yield f"SpaceForm({n},{k}{',h' if hyp else ''})", build_space_form_pair(n, k, hyp)
        for n in (2, 3):
            yield f"Lagrangian({n}{',h' if hyp else ''})", build_lagrangian_pair(n, hyp)


def test_criterion_1_algebraic_identities(acceptance_log):
    rng = np.random.default_rng(0)
    checks = []
    for label, spec in _all_specs():
        worst = max(check_bracket_relations(spec, trials=100).values())
        worst = max(worst, max(lie_triple_residual(spec, trials=100).values()))
        for _ in range(100):
            X = random_element(spec, None, rng)
            parts = decompose(X, spec)
            worst = max(worst, float(np.abs(parts.total() - X).max()))
            for name in ("pp", "pm", "mp", "mm"):
                worst = max(worst, float(np.abs(project(parts[name], spec, name) - parts[name]).max()))
        checks.append((label, f"{worst:.1e}", worst < 1e-12))
    record(acceptance_log, 1, "algebraic identities < 1e-12", checks)


def test_criterion_2_rank_dichotomy(acceptance_log):
    checks = []
    cases = [(f"SpaceForm({n},{k})", build_space_form_pair(n, k), min(n, k + 1))
             for n in range(2, 5) for k in range(1, 5)]
    cases += [(f"Lagrangian({n})", build_lagrangian_pair(n), n) for n in (2, 3)]
    for label, spec, expected in cases:
        rank = rank_oracle(spec).rank
        try:
            vacuum_solution(spec, chart=GridChart.uniform(spec.n, 3, 0.05))
            built = True
        except RankObstruction:
            built = False
        checks.append((label, f"rank {rank} built {built}", rank == expected and built == (spec.n <= rank)))
    record(acceptance_log, 2, "rank = min(n, k+1) and vacuum exists iff n <= rank", checks)


def test_criterion_3_zero_curvature_pipeline(acceptance_log):
    spec = spec_of("s21")
    vac = commuting_vacuum(spec, chart=GridChart.uniform(2, 65, 0.05))
    mc_vac = mc_residual(vac).max()
    closed = float(np.abs(integrate_frame(vac, 2.0).F - closed_form_frame(vac, 2.0).F).max())
    path = max(path_independence_residual(solution(name), 2.0) for name in ("s21", "h21", "l2"))
    drift = max(frame(name, lam).form_drift() for name in ("s21", "h21", "l2") for lam in (0.5, 2.0, 3.0))
    errs = []
    for N in (65, 129, 257):
        f = local_solution(spec, GridChart.uniform(2, N, 3.2 / (N - 1)), seed=0)
        errs.append(mc_residual(f, order=4).max())
    order = min(math.log2(errs[i] / errs[i + 1]) for i in range(2))
    record(acceptance_log, 3, "zero-curvature pipeline", [
        ("vacuum mc", f"{mc_vac:.1e}", mc_vac < 1e-12),
        ("closed-form frame", f"{closed:.1e}", closed < 1e-9),
        ("path independence", f"{path:.1e}", path < 1e-8),
        ("drift", f"{drift:.1e}", drift < 1e-8),
        ("observed order", f"{order:.2f}", order >= 3.5),
    ])


def test_criterion_4_metrics(acceptance_log):
    lams = (0.5, 2.0, 3.0, -2.0)
    scaling = max(geom.metric_scaling_residual(solution(name).replace(spec=calibrated(name)), lam)
                  for name in ("s21", "s22", "h21", "l2") for lam in lams)
    sec = max(report(name, lam).sec_dev for name in ("s21", "s22", "l2") for lam in lams)
    hyp = [report("h21", lam) for lam in (2.0, 3.0)]
    below = max(r.sec_mean for r in hyp)
    magnitude = max(abs(abs(r.sec_mean) - 1 / r_lambda(r.lam) ** 2) for r in hyp)
    record(acceptance_log, 4, "metric homothety and curvature", [
        ("metric scaling", f"{scaling:.1e}", scaling < 1e-10),
        ("compact sec_dev", f"{sec:.1e}", sec < 1e-3),
        ("hyperbolic magnitude", f"{magnitude:.1e}", magnitude < 1e-3),
        ("hyperbolic K < -1", f"{below:.4f}", below < -1.0),
    ])


def test_criterion_5_structure(acceptance_log):
    ii1 = max(geom.second_fundamental_form(frame(name, 1.0), solution(name), 1.0, calibrated(name)).numeric_max
              for name in ("s21", "s22", "h21", "l2"))
    disc = max(report(name, lam).ii_discrepancy for name in ("s21", "s22", "h21", "l2") for lam in (2.0, 3.0))
    comm = max(report("s22", lam).normal_comm for lam in (0.5, 2.0, 3.0))
    lag = max(geom.lagrangian_residual(frame("l2", lam), solution("l2"), lam, calibrated("l2"))
              for lam in (1.0, 3.0))
    record(acceptance_log, 5, "second fundamental form and normal bundle", [
        ("II at 1", f"{ii1:.1e}", ii1 < 1e-10),
        ("II alg vs num", f"{disc:.1e}", disc < 1e-4),
        ("shape commutators", f"{comm:.1e}", comm < 1e-6),
        ("lagrangian", f"{lag:.1e}", lag < 1e-8),
    ])


def test_criterion_6_curved_flats(acceptance_log):
    flat = [solution(name) for name in ("s21", "s22", "h21", "l2")]
    # the curved-flat equation is the algebraic top coefficient of MC, so it holds on local data too
    cf = max(geom.curved_flat_residual(f) for f in flat)
    vac = vacuum_solution(spec_of("s21"), chart=GridChart.uniform(2, 65, 0.05))
    cf = max(cf, geom.curved_flat_residual(commuting_vacuum(spec_of("s22"), chart=vac.chart)))
    ratio = geom.asymptotic_flat_check(solution("s21"), (10.0, 100.0))[1][0]
    fm_vac = geom.flat_metric_residual(vac)
    fm_imp = geom.flat_metric_residual(load_connection(FIXTURES / "local_s21.rfc"))
    chart = GridChart((65, 65), (0.05, 0.05), (0.2, 0.0))
    K = geom.metric_flatness(geom.round_metric(chart, 2.0), chart)
    lo, hi = geom.ASYM_RATIO_RANGE
    record(acceptance_log, 6, "curved flats and the flat metric", [
        ("curved flat", f"{cf:.1e}", cf < 1e-10),
        ("decade ratio", f"{ratio:.4f}", lo <= ratio <= hi),
        ("vacuum flat metric", f"{fm_vac:.1e}", fm_vac < 1e-12),
        ("imported flat metric", f"{fm_imp:.1e}", fm_imp < 1e-4),
        ("round control", f"{K:.5f}", abs(K / 0.25 - 1) < 0.05),
    ])


def _cli(argv):
    return cli.main([str(a) for a in argv])


def test_criterion_7_cli_contract(acceptance_log, tmp_path, capsys):
    same = True
    for cfg in ("s21_sweep", "lagrangian2", "hyperbolic21"):
        runs = []
        for i in range(2):
            d = tmp_path / f"{cfg}{i}"
            code = _cli(["verify", "--config", FIXTURES / f"{cfg}.ini", "--out", d])
            runs.append((code, (d / "report.csv").read_bytes(), (d / "report.json").read_bytes()))
        same &= runs[0] == runs[1] and runs[0][0] == cli.EXIT_OK
    codes = {
        "ok": (_cli(["pair", "--config", FIXTURES / "s21_sweep.ini"]), cli.EXIT_OK),
        "config": (_cli(["verify", "--config", FIXTURES / "zero_lambda.ini"]), cli.EXIT_CONFIG),
        "obstructed": (_cli(["vacuum", "--config", FIXTURES / "obstructed.ini", "--out", tmp_path / "o"]),
                       cli.EXIT_OBSTRUCTED),
        "io": (_cli(["verify", "--input", tmp_path / "missing.rfc", "--out", tmp_path / "m"]), cli.EXIT_IO),
    }
    capsys.readouterr()
    named = {}
    for fixture, expected in (("defect_bracket", "mc"), ("defect_degree", "degree"),
                              ("tight_curvature", "sec_dev")):
        code = _cli(["verify", "--config", FIXTURES / f"{fixture}.ini", "--out", tmp_path / fixture])
        out = capsys.readouterr().out
        named[fixture] = (code == cli.EXIT_VERIFY and f"{expected}=" in out, code)
    checks = [("byte-identical reports", same, same)]
    checks += [(f"exit {k}", got, got == want) for k, (got, want) in codes.items()]
    checks += [(f"{k} named", code, good) for k, (good, code) in named.items()]
    record(acceptance_log, 7, "CLI contract", checks)
