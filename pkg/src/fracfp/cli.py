"""Configuration-driven experiment runner.

Usage::

    fracfp SUBCOMMAND [--config PATH] [--out DIR] [--quiet]

The config is an INI file with ``[problem]``, ``[mesh]`` and ``[run]``
sections. Values are Python literals (numbers, strings, lists, tuples);
bare words such as ``mode1`` are read as strings and ``pi`` as math.pi.

Exit codes: 0 success, 1 some check failed (the report is still written),
2 configuration error.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import csv
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import experiments
from .estimates import (
    DEFAULT_SLACK,
    AssumptionError,
    check_classical_estimates,
    check_mild_estimates,
    compute_constants,
    scan_constants,
)
from .frac_core import TimeMesh
from .problems import CORPUS_ALPHAS, forcing_family, initial_value, source_preset
from .solver import MAX_MODES, ProblemSpec, solve, write_trajectory_csv
from .spectral import PolynomialForcing, build_basis
from .verify import (
    RegularityConfig,
    check_regularity_rates,
    convergence_study,
    manufactured_source,
    mode_oracle,
)

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "build_problem", "run", "main"]

SUBCOMMANDS = ("solve", "verify-estimates", "constants", "scan-alpha", "rates", "convergence",
               "all")

_DEFAULTS = {
    "problem": {"alpha": 0.75, "kappa": 1.0, "L": math.pi, "T": 1.0, "m": 16, "u0": "mode1",
                "g": "zero", "forcing": "zero", "forcing_value": 1.0, "forcing_coeffs": None},
    "mesh": {"N": 2048, "r": None},
    "run": {"scheme": "vie", "slack": DEFAULT_SLACK, "family": "auto",
            "alpha_grid": experiments.SCAN_GRID, "rate_window": (1e-3, 1e-1), "rate_q": 1,
            "rate_tol": 0.1, "N_list": (256, 512, 1024, 2048),
            "manufactured": ((1.0, 1), (2.0, 2)), "out": "out"},
}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    problem: dict = field(default_factory=lambda: dict(_DEFAULTS["problem"]))
    mesh: dict = field(default_factory=lambda: dict(_DEFAULTS["mesh"]))
    run: dict = field(default_factory=lambda: dict(_DEFAULTS["run"]))

    @property
    def schemes(self) -> tuple:
        s = self.run["scheme"]
        return ("vie", "direct") if s == "both" else (s,)

    @property
    def grading(self) -> float:
        r = self.mesh["r"]
        return 2.0 / self.problem["alpha"] if r is None else float(r)


def _literal(text: str):
    text = text.strip()
    if text == "pi":
        return math.pi
    if text in ("none", "None", ""):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _real(key, v, lo=None, hi=None, lo_open=True, hi_open=True):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(key, f"expected a finite number, got {v!r}")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(key, f"must be {'>' if lo_open else '>='} {lo}, got {v!r}")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ConfigError(key, f"must be {'<' if hi_open else '<='} {hi}, got {v!r}")
    return float(v)


def _int(key, v, lo=1, hi=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"expected an integer, got {v!r}")
    if v < lo or (hi is not None and v > hi):
        raise ConfigError(key, f"must lie in [{lo}, {hi if hi is not None else 'inf'}], got {v}")
    return v


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    p, m, r = cfg.problem, cfg.mesh, cfg.run
    p["alpha"] = _real("problem.alpha", p["alpha"], 0.0, 1.0)
    p["kappa"] = _real("problem.kappa", p["kappa"], 0.0)
    p["L"] = _real("problem.L", p["L"], 0.0)
    p["T"] = _real("problem.T", p["T"], 0.0)
    p["m"] = _int("problem.m", p["m"], 1, MAX_MODES)
    u0 = p["u0"]
    if isinstance(u0, (list, tuple)):
        if len(u0) != p["m"]:
            raise ConfigError("problem.u0", f"coefficient list has {len(u0)} entries, m = {p['m']}")
        for i, c in enumerate(u0):
            _real(f"problem.u0[{i}]", c)
    elif u0 not in ("zero", "mode1", "bump"):
        raise ConfigError("problem.u0", f"unknown preset {u0!r} (zero | mode1 | bump | list)")
    if p["g"] not in ("zero", "smooth"):
        raise ConfigError("problem.g", f"unknown preset {p['g']!r} (zero | smooth)")
    if p["g"] == "smooth" and p["m"] < 3:
        raise ConfigError("problem.g", "the smooth source needs m >= 3")
    if p["forcing"] not in ("zero", "constant", "spacetime", "polynomial"):
        raise ConfigError("problem.forcing",
                          f"unknown preset {p['forcing']!r} (zero | constant | spacetime | "
                          "polynomial)")
    p["forcing_value"] = _real("problem.forcing_value", p["forcing_value"])
    if p["forcing"] == "polynomial":
        try:
            c = np.atleast_2d(np.asarray(p["forcing_coeffs"], dtype=float))
        except (TypeError, ValueError):
            c = None
        if c is None or c.ndim != 2 or c.size == 0 or not np.all(np.isfinite(c)):
            raise ConfigError("problem.forcing_coeffs",
                              "expected a nested list [[c00, c01, ...], [c10, ...]] with "
                              "F = sum c_ij t^i x^j")
    m["N"] = _int("mesh.N", m["N"], 4)
    if m["r"] is not None:
        m["r"] = _real("mesh.r", m["r"], 1.0, lo_open=False)
    if r["scheme"] not in ("vie", "direct", "both"):
        raise ConfigError("run.scheme", f"expected vie | direct | both, got {r['scheme']!r}")
    r["slack"] = _real("run.slack", r["slack"], 0.0, lo_open=False)
    if r["family"] not in ("auto", "mild", "classical"):
        raise ConfigError("run.family", f"expected auto | mild | classical, got {r['family']!r}")
    grid = r["alpha_grid"]
    if not isinstance(grid, (list, tuple)) or len(grid) < 2:
        raise ConfigError("run.alpha_grid", "expected a list of at least two values")
    r["alpha_grid"] = tuple(_real(f"run.alpha_grid[{i}]", a, 0.5, 1.0) for i, a in enumerate(grid))
    win = r["rate_window"]
    if not isinstance(win, (list, tuple)) or len(win) != 2:
        raise ConfigError("run.rate_window", "expected a pair (lo, hi)")
    lo, hi = (_real("run.rate_window", w, 0.0, 1.0, hi_open=False) for w in win)
    if not lo < hi:
        raise ConfigError("run.rate_window", "needs lo < hi")
    r["rate_window"] = (lo, hi)
    r["rate_q"] = _int("run.rate_q", r["rate_q"], 0, 2)
    r["rate_tol"] = _real("run.rate_tol", r["rate_tol"], 0.0)
    nl = r["N_list"]
    if (not isinstance(nl, (list, tuple)) or len(nl) < 3
            or any(isinstance(n, bool) or not isinstance(n, int) or n < 4 for n in nl)
            or any(b <= a for a, b in zip(nl, nl[1:]))):
        raise ConfigError("run.N_list", "expected at least three increasing integers >= 4")
    r["N_list"] = tuple(nl)
    cases = r["manufactured"]
    try:
        cases = tuple((float(s), int(k)) for s, k in cases)
    except (TypeError, ValueError):
        raise ConfigError("run.manufactured", "expected a list of (sigma, k) pairs") from None
    for s, k in cases:
        if not 1 <= k <= p["m"]:
            raise ConfigError("run.manufactured", f"mode index {k} outside 1..{p['m']}")
        if s < p["alpha"]:
            raise ConfigError("run.manufactured", f"sigma = {s} must be >= alpha")
    r["manufactured"] = cases
    if not isinstance(r["out"], str) or not r["out"]:
        raise ConfigError("run.out", "expected a directory name")
    return cfg


def load_config(path: str | None) -> ExperimentConfig:
    """Read and validate an INI config; ``None`` gives the defaults."""
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError("--config", f"cannot parse {path}: {exc}") from None
        for section in parser.sections():
            if section not in _DEFAULTS:
                raise ConfigError(section, f"unknown section (expected one of {list(_DEFAULTS)})")
            target = getattr(cfg, section)
            for key, text in parser.items(section):
                if key not in _DEFAULTS[section]:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                target[key] = _literal(text)
    return _validate(cfg)


def build_problem(cfg: ExperimentConfig, alpha: float | None = None) -> ProblemSpec:
    p = cfg.problem
    a = p["alpha"] if alpha is None else alpha
    basis = build_basis(p["L"], p["m"])
    if isinstance(p["u0"], (list, tuple)):
        u0 = np.asarray(p["u0"], dtype=float)
        u0_h2 = None
    else:
        u0, u0_h2 = initial_value(p["u0"], basis)
    g, gp = source_preset(p["g"], p["m"])
    if p["forcing"] == "polynomial":
        F = PolynomialForcing(p["forcing_coeffs"])
    else:
        F = forcing_family(p["forcing"], p["L"], p["forcing_value"])
    return ProblemSpec(a, p["kappa"], basis, p["T"], F=F, u0=u0, g=g, g_prime=gp, u0_h2=u0_h2,
                       name=f"{p['forcing']}-a{a}")


# ---------------------------------------------------------------------------
# subcommands; each returns (passed, report lines)


def _mesh(cfg, problem, N=None):
    return TimeMesh(problem.T, cfg.mesh["N"] if N is None else N, cfg.grading)


def _cmd_solve(cfg, out):
    problem = build_problem(cfg)
    mesh = _mesh(cfg, problem)
    lines = [f"problem {problem.name}: alpha={problem.a}, m={problem.m}, N={mesh.N}, "
             f"r={mesh.r:.6g}"]
    u0 = problem.u0
    single = (problem.g is None and getattr(problem.F, "is_zero", False)
              and np.count_nonzero(u0) == 1)
    for s in cfg.schemes:
        traj = solve(problem, mesh, s)
        path = os.path.join(out, f"trajectory_{s}.csv")
        write_trajectory_csv(traj, path)
        lines.append(f"{s}: wrote {path}")
        if single:
            k = int(np.flatnonzero(u0)[0])
            ref = u0[k] * mode_oracle(problem.a, problem.kappa, problem.basis.lam[k], mesh.nodes)
            err = np.max(np.abs(traj.coeffs[:, k] - ref) / np.abs(ref))
            lines.append(f"{s}: max relative error of mode {k + 1} vs Mittag-Leffler "
                         f"oracle = {err:.3e}")
    return True, lines


def _constants(cfg, problem):
    try:
        return compute_constants(problem, cfg.run["family"])
    except AssumptionError as exc:
        raise ConfigError("run.family", str(exc)) from None


def _cmd_verify(cfg, out):
    problem = build_problem(cfg)
    c = _constants(cfg, problem)
    mesh = _mesh(cfg, problem)
    ok, lines = True, []
    for s in cfg.schemes:
        traj = solve(problem, mesh, s)
        rep = check_mild_estimates(traj, c, problem, cfg.run["slack"])
        if c.classical:
            rep.extend(check_classical_estimates(traj, c, problem, cfg.run["slack"]))
        path = os.path.join(out, f"estimates_{s}.csv")
        rep.to_csv(path)
        ok &= rep.passed
        lines.append(f"{s}: {len(rep.rows)} rows, {len(rep.failures())} failed -> {path}")
        lines += [f"  FAIL {row.inequality_id}: lhs={row.lhs:.6g} rhs={row.rhs:.6g}"
                  for row in rep.failures()]
    if not c.classical:
        lines.append("classical rows skipped (need 1/2 < alpha < 1 and family auto|classical)")
    return ok, lines


def _cmd_constants(cfg, out):
    problem = build_problem(cfg)
    c = _constants(cfg, problem)
    path = os.path.join(out, "constants.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "value", "log10", "provenance"])
        for k, v in c.as_dict().items():
            if v is None:
                continue
            lg = c.log10.get(k, math.log10(v) if 0 < v < math.inf else float("nan"))
            w.writerow([k, f"{v:.17g}", f"{lg:.17g}", c.provenance.get(k, "")])
    lines = [f"constants for {problem.name} -> {path}"]
    lines += [f"  {k} = {v:.6g}" for k, v in c.as_dict().items() if v is not None]
    return True, lines


def _cmd_scan(cfg, out):
    problem = build_problem(cfg)
    table = scan_constants(cfg.run["alpha_grid"], problem)
    path = os.path.join(out, "scan.csv")
    table.to_csv(path)
    lines = [f"scan over {len(table.alpha)} alpha values -> {path}"]
    lines += [f"  {'PASS' if v else 'FAIL'} {k}" for k, v in table.flags.items()]
    return all(table.flags.values()), lines


def _cmd_rates(cfg, out):
    problem = build_problem(cfg)
    if not problem.a > 0.5:
        raise ConfigError("problem.alpha", "regularity rates assume 1/2 < alpha < 1")
    rc = RegularityConfig(q=cfg.run["rate_q"], window=cfg.run["rate_window"],
                          tol=cfg.run["rate_tol"])
    mesh = _mesh(cfg, problem)
    ok, lines = True, []
    for s in cfg.schemes:
        res = check_regularity_rates(solve(problem, mesh, s), rc)
        path = os.path.join(out, f"rates_{s}.csv")
        res.to_csv(path)
        ok &= res.ok
        lines.append(f"{s}: -> {path}")
        for f in res.fits:
            lines.append(f"  {'PASS' if res.passed[f.label] else 'FAIL'} {f.label}: "
                         f"exponent {f.exponent:.4f} (scaled {rc.q + f.exponent:.4f}, "
                         f"needs >= {res.expected[f.label] - rc.tol:.4f})")
    return ok, lines


def _cmd_convergence(cfg, out):
    problem = build_problem(cfg)
    ok, lines = True, []
    for sigma, k in cfg.run["manufactured"]:
        ms = manufactured_source(problem, sigma, k)
        for s in cfg.schemes:
            tab = convergence_study(ms.problem, ms.exact, cfg.run["N_list"], s, cfg.grading)
            path = os.path.join(out, f"convergence_{s}_s{sigma:g}_k{k}.csv")
            tab.to_csv(path)
            order, err = float(tab.order[-2]), float(tab.error[-1])
            good = order >= 0.9 or err <= 1e-12
            ok &= good
            lines.append(f"{'PASS' if good else 'FAIL'} t^{sigma:g} w{k} {s}: order "
                         f"{order:.3f}, finest error {err:.3e} -> {path}")
    return ok, lines


def _cmd_all(cfg, out):
    """Run the acceptance corpus; every entry writes its own files."""
    N, slack = cfg.mesh["N"], cfg.run["slack"]
    ok, lines = True, []

    def record(outcome):
        nonlocal ok
        ok &= outcome.passed
        lines.append(outcome.line())

    for o in experiments.oracle_errors(N=N):
        traj = o.detail.pop("traj")
        write_trajectory_csv(traj, os.path.join(out, f"oracle_a{traj.alpha}_{traj.scheme}.csv"))
        record(o)
    for p, s, rep in experiments.estimate_reports(N=N, schemes=cfg.schemes, slack=slack):
        path = os.path.join(out, f"estimates_{p.name}_{s}.csv")
        rep.to_csv(path)
        ok &= rep.passed
        lines.append(f"{'PASS' if rep.passed else 'FAIL'} estimates {p.name} {s}: "
                     f"{len(rep.rows)} rows, {len(rep.failures())} failed")
    table = experiments.run_scan(cfg.run["alpha_grid"])
    table.to_csv(os.path.join(out, "scan.csv"))
    for k, v in table.flags.items():
        ok &= v
        lines.append(f"{'PASS' if v else 'FAIL'} scan {k}")
    for a, o in zip(CORPUS_ALPHAS, experiments.oracle_rates(N=N, window=cfg.run["rate_window"])):
        o.detail.pop("result").to_csv(os.path.join(out, f"rates_a{a}.csv"))
        record(o)
    record(experiments.z_refinement())
    for o in experiments.mild_residual_study(N_list=cfg.run["N_list"]):
        record(o)
    for o in experiments.manufactured_orders(N_list=cfg.run["N_list"]):
        tab = o.detail.pop("table")
        tab.to_csv(os.path.join(out, "convergence_" + "_".join(o.name.split()[1:])
                                .replace("^", "").replace("=", "") + ".csv"))
        record(o)
    return ok, lines


_COMMANDS = {
    "solve": _cmd_solve,
    "verify-estimates": _cmd_verify,
    "constants": _cmd_constants,
    "scan-alpha": _cmd_scan,
    "rates": _cmd_rates,
    "convergence": _cmd_convergence,
    "all": _cmd_all,
}


def run(command: str, config_path: str | None = None, out: str | None = None,
        quiet: bool = False) -> int:
    """Run one subcommand and return its exit code."""
    try:
        cfg = load_config(config_path)
        out = out or cfg.run["out"]
        os.makedirs(out, exist_ok=True)
        ok, lines = _COMMANDS[command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status = "all checks passed" if ok else "SOME CHECKS FAILED"
    text = "\n".join([f"fracfp {command}", *lines, status]) + "\n"
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(text)
    if not quiet:
        sys.stdout.write(text)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fracfp", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", metavar="PATH", help="INI experiment config")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides run.out)")
    parser.add_argument("--quiet", action="store_true", help="do not echo the report")
    args = parser.parse_args(argv)
    return run(args.command, args.config, args.out, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
