"""Command-line front end: pair summaries, data generation, verification sweeps.

Exit codes: 0 success, 2 config error, 3 rank obstruction, 4 verification
failure, 5 I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import geom
from .liecore import Family, build_lagrangian_pair, build_space_form_pair, rank_oracle
from .loops import GridChart, connection_degree_check, load_connection, save_connection
from .zerocurv import (IntegrabilityError, RankObstruction, commuting_vacuum, local_solution, mc_residual,
                       regularity_check, vacuum_solution)

EXIT_OK, EXIT_CONFIG, EXIT_OBSTRUCTED, EXIT_VERIFY, EXIT_IO = 0, 2, 3, 4, 5

DATA_KINDS = ("local", "commuting", "abelian")
MC_BUDGET = 1e-5          # order-4 MC residual on h = 0.05 grids
REFERENCE_SPACING = 0.05
FD_BUDGETS = ("sec_dev", "ii_discrepancy", "normal_comm", "flat_metric", "mc")
TOL_NAMES = tuple(geom.BUDGETS) + ("mc", "regularity", "asym_ratio_lo", "asym_ratio_hi")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    family: Family = Family.SPACE_FORM
    n: int = 2
    k: int = 1
    hyperbolic: bool = False
    points: int | None = None
    spacing: float = REFERENCE_SPACING
    lambdas: tuple[float, ...] = (2.0,)
    seed: int = 0
    data: str = "local"
    input: Path | None = None
    mu: float = 0.3
    tolerances: dict[str, float] = field(default_factory=dict)
    out: Path = Path("out")

    def validate(self) -> "RunConfig":
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.family is Family.SPACE_FORM and self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.points is not None and self.points < 3:
            raise ConfigError("grid needs at least 3 points per axis")
        if not self.spacing > 0:
            raise ConfigError("grid spacing must be positive")
        if not self.lambdas:
            raise ConfigError("empty lambda list")
        for lam in self.lambdas:
            if lam == 0 or not math.isfinite(lam):
                raise ConfigError(f"lambda must be a nonzero real number, got {lam}")
        if self.data not in DATA_KINDS:
            raise ConfigError(f"data kind must be one of {', '.join(DATA_KINDS)}")
        for name, val in self.tolerances.items():
            if name not in TOL_NAMES:
                raise ConfigError(f"unknown tolerance {name!r}")
            if not val > 0:
                raise ConfigError(f"tolerance {name} must be positive")
        return self

    def spec(self):
        if self.family is Family.SPACE_FORM:
            return build_space_form_pair(self.n, self.k, self.hyperbolic)
        return build_lagrangian_pair(self.n, self.hyperbolic)

    def chart(self) -> GridChart:
        pts = self.points or (65 if self.n == 2 else 33)
        return GridChart.uniform(self.n, pts, self.spacing)

    def budgets(self) -> dict[str, float]:
        """Defaults for h = 0.05, loosened by (h / 0.05)^4 on coarser grids, then overrides."""
        b = dict(geom.BUDGETS, mc=MC_BUDGET)
        scale = max(1.0, (self.spacing / REFERENCE_SPACING) ** 4)
        for name in FD_BUDGETS:
            b[name] *= scale
        b.update(self.tolerances)
        return b


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _parse_family(s: str) -> Family:
    v = s.strip().lower()
    for fam in Family:
        if v in (fam.value.lower(), fam.name.lower()):
            return fam
    if v in ("lagrangian", "cp"):
        return Family.LAGRANGIAN
    raise ConfigError(f"unknown family {s!r}")


def parse_lambda_list(s: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad lambda list {s!r}") from exc
    if not vals:
        raise ConfigError("empty lambda list")
    return vals


def lambda_sweep(lo: float, hi: float, count: int, log: bool) -> tuple[float, ...]:
    if count < 1:
        raise ConfigError("sweep count must be positive")
    if log:
        if lo <= 0 or hi <= 0:
            raise ConfigError("log sweep needs positive bounds")
        vals = np.geomspace(lo, hi, count)
    else:
        vals = np.linspace(lo, hi, count)
    return tuple(float(v) for v in vals)


def load_config(path: Path | None) -> RunConfig:
    """Read a sectioned key=value file: [pair], [grid], [lambda], [run], [tolerances]."""
    cfg = RunConfig()
    if path is None:
        return cfg
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    base = Path(path).parent
    try:
        if cp.has_section("pair"):
            s = cp["pair"]
            cfg.family = _parse_family(s.get("family", cfg.family.value))
            cfg.n = s.getint("n", cfg.n)
            cfg.k = s.getint("k", cfg.k if cfg.family is Family.SPACE_FORM else cfg.n)
            cfg.hyperbolic = _parse_bool(s.get("hyperbolic", "false"))
        if cp.has_section("grid"):
            s = cp["grid"]
            if "points" in s:
                cfg.points = s.getint("points")
            cfg.spacing = s.getfloat("spacing", cfg.spacing)
        if cp.has_section("lambda"):
            s = cp["lambda"]
            if "values" in s:
                cfg.lambdas = parse_lambda_list(s["values"])
            elif "min" in s:
                cfg.lambdas = lambda_sweep(s.getfloat("min"), s.getfloat("max"), s.getint("count"),
                                           _parse_bool(s.get("log", "false")))
        if cp.has_section("run"):
            s = cp["run"]
            cfg.seed = s.getint("seed", cfg.seed)
            cfg.data = s.get("data", cfg.data).strip()
            cfg.mu = s.getfloat("mu", cfg.mu)
            if "input" in s:
                cfg.input = base / s["input"].strip()
            if "out" in s:
                cfg.out = base / s["out"].strip()
        if cp.has_section("tolerances"):
            cfg.tolerances = {k: float(v) for k, v in cp["tolerances"].items()}
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from exc
    if cfg.family is Family.LAGRANGIAN:
        cfg.k = cfg.n
    return cfg


def _parse_tol(items) -> dict[str, float]:
    out = {}
    for item in items or ():
        name, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects NAME=VAL, got {item!r}")
        try:
            out[name.strip()] = float(val)
        except ValueError as exc:
            raise ConfigError(f"bad tolerance value {item!r}") from exc
    return out


def resolve_config(args) -> RunConfig:
    cfg = load_config(Path(args.config) if args.config else None)
    if args.lambda_ is not None:
        cfg.lambdas = parse_lambda_list(args.lambda_)
    if args.out is not None:
        cfg.out = Path(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "input", None):
        cfg.input = Path(args.input)
    cfg = replace(cfg, tolerances={**cfg.tolerances, **_parse_tol(args.tol)})
    return cfg.validate()


def thread_cap() -> int:
    raw = os.environ.get("REFLOW_THREADS", "")
    try:
        return max(1, int(raw)) if raw else (os.cpu_count() or 1)
    except ValueError as exc:
        raise ConfigError(f"REFLOW_THREADS must be an integer, got {raw!r}") from exc


# ---------------------------------------------------------------------------
# commands

def _fmt_verdict(n: int, rank: int) -> str:
    return f"possible: rank={rank}" if n <= rank else f"obstructed: n={n} > rank={rank}"


def cmd_pair(cfg: RunConfig, out=sys.stdout) -> int:
    spec = cfg.spec()
    res = rank_oracle(spec, seed=cfg.seed)
    print(f"family {spec.family.value} n={spec.n} k={spec.k} m={spec.m} "
          f"hyperbolic={'yes' if spec.hyperbolic else 'no'}", file=out)
    print("dims " + " ".join(f"{name}={spec.dims[name]}" for name in ("pp", "pm", "mp", "mm")), file=out)
    print(f"rank {res.rank}", file=out)
    print(_fmt_verdict(spec.n, res.rank), file=out)
    return EXIT_OK


def _generate(cfg: RunConfig, spec):
    chart = cfg.chart()
    if cfg.data == "local":
        return local_solution(spec, chart, seed=cfg.seed, mu=cfg.mu)
    if cfg.data == "abelian":
        return vacuum_solution(spec, seed=cfg.seed, chart=chart)
    res = rank_oracle(spec, seed=cfg.seed)
    if res.rank < spec.n:
        raise RankObstruction(spec.n, res.rank, res.p_rank)
    return commuting_vacuum(spec, seed=cfg.seed, chart=chart)


def cmd_vacuum(cfg: RunConfig, out=sys.stdout, kind: str | None = None) -> int:
    cfg = replace(cfg, data=kind or (cfg.data if cfg.data != "local" else "commuting"))
    spec = cfg.spec()
    field_ = _generate(cfg, spec)
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / "connection.rfc"
    save_connection(field_, path)
    reg = regularity_check(field_)
    mc = mc_residual(field_)
    print(f"wrote {path}", file=out)
    print(f"data {cfg.data} grid {'x'.join(map(str, field_.chart.shape))} h={field_.chart.spacing[0]}", file=out)
    print(f"regularity margin {reg.sigma_min:.3e}{'' if reg.ok else ' (degenerate coframe)'}", file=out)
    print(f"mc residual max {mc.max():.3e} (power {mc.worst_power()})", file=out)
    return EXIT_OK


def _field_for(cfg: RunConfig):
    if cfg.input is not None:
        return load_connection(cfg.input)
    return _generate(cfg, cfg.spec())


def _precheck(field_, budgets) -> list[tuple[str, float]]:
    """Named failures of the data itself, before any geometry."""
    failed = []
    deg = connection_degree_check(field_)
    if not deg.ok:
        failed.append(("degree", deg.residual))
    mc = mc_residual(field_, order=4).max()
    if not mc <= budgets["mc"]:
        failed.append(("mc", mc))
    reg = regularity_check(field_)
    if not reg.ok:
        failed.append(("regularity", reg.sigma_min))
    return failed


def run_reports(cfg: RunConfig, field_) -> list[geom.GeometryReport]:
    budgets = cfg.budgets()
    spec = field_.spec
    calibrated = geom.calibrate(spec, field_)
    lams = list(cfg.lambdas)
    workers = min(thread_cap(), len(lams))
    if workers == 1:
        return [geom.full_report(field_, spec, lam, calibrated, budgets) for lam in lams]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map preserves input order regardless of completion order
        return list(pool.map(lambda lam: geom.full_report(field_, spec, lam, calibrated, budgets), lams))


def _worst(rep: geom.GeometryReport, budgets) -> str:
    vals = {name: getattr(rep, name) for name in rep.failures if hasattr(rep, name)}
    parts = [f"{name}={vals[name]:.3e}" if name in vals else name for name in rep.failures]
    return ", ".join(parts)


def _write_reports(cfg: RunConfig, stem: str, reports) -> tuple[Path, Path]:
    cfg.out.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.out / f"{stem}.csv"
    json_path = cfg.out / f"{stem}.json"
    csv_path.write_text(geom.reports_csv(reports), encoding="utf-8")
    json_path.write_text(geom.reports_json(reports), encoding="utf-8")
    return csv_path, json_path


def _verify_like(cfg: RunConfig, stem: str, out) -> int:
    field_ = _field_for(cfg)
    budgets = cfg.budgets()
    pre = _precheck(field_, budgets)
    if pre:
        print("verification failed: " + ", ".join(f"{n}={v:.3e}" for n, v in pre), file=out)
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / f"{stem}.failed").write_text(
            "".join(f"{n} {v!r}\n" for n, v in pre), encoding="utf-8")
        return EXIT_VERIFY
    reports = run_reports(cfg, field_)
    csv_path, json_path = _write_reports(cfg, stem, reports)
    bad = 0
    for rep in reports:
        status = "ok" if rep.ok else "FAIL " + _worst(rep, budgets)
        print(f"lambda={rep.lam:g} R={rep.R_lambda:.6f} K={rep.sec_mean:.6f} "
              f"(expected {rep.sec_expected:.6f}) {status}", file=out)
        bad += not rep.ok
    print(f"wrote {csv_path} and {json_path}", file=out)
    if bad:
        print(f"verification failed: {bad} of {len(reports)} lambda values", file=out)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out=sys.stdout) -> int:
    return _verify_like(cfg, "report", out)


def cmd_scan(cfg: RunConfig, out=sys.stdout) -> int:
    cfg = replace(cfg, lambdas=tuple(sorted(cfg.lambdas)))
    return _verify_like(cfg, "scan", out)


COMMANDS = {"pair": cmd_pair, "vacuum": cmd_vacuum, "verify": cmd_verify, "scan": cmd_scan}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="sectioned key=value run file")
    common.add_argument("--lambda", dest="lambda_", metavar="LIST", help="comma-separated lambda values")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--tol", action="append", metavar="NAME=VAL", help="override a budget (repeatable)")
    p = argparse.ArgumentParser(prog="reflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("pair", parents=[common], help="print the symmetric pair and its rank verdict")
    sub.add_parser("vacuum", parents=[common], help="write constant flat connection data")
    for name, text in (("verify", "run every geometric check per lambda"),
                       ("scan", "sweep lambda and tabulate R, curvature and residuals")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--input", metavar="PATH", help="connection container to verify")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, out=sys.stdout)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RankObstruction as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_OBSTRUCTED
    except (geom.CalibrationError, IntegrabilityError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # malformed container files surface as ValueError from the reader
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
