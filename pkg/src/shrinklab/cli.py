"""Command-line experiment runner.

Every subcommand writes a CSV (header always present) to ``--out`` or stdout,
and next to a file output a ``.meta`` sidecar of ``key=value`` lines holding
the resolved config, versions, seed, git hash and wall time. Exit codes:
0 success, 1 a checked criterion failed, 2 usage or config error, 3 a
resource budget was exceeded. Errors also print one ``error=<reason> ...``
line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import subprocess
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import dyadic_slope, series_partial_sum
from .bernoulli import (
    DEFAULT_CAP as BERNOULLI_CAP,
    RunAvoidanceTable,
    avoidance_probabilities,
    fs_run_probability,
    halving_approx,
)
from .config import ExperimentConfig, schedule_for
from .errors import CapExceeded, ConfigError, ShrinkError
from .gauss import etilde_steps, fit_mixing_rate, mixing_eta_estimate
from .intervals import IntervalUnion
from .montecarlo import Query, resolve_system, run_batch
from .schedules import classify_schedule

SUBCOMMANDS = ("exact-bernoulli", "exact-gauss", "mc-run", "series", "classify", "mixing", "selftest")


class Report:
    def __init__(self, header: list[str]):
        self.header = header
        self.rows: list[list] = []
        self.criteria: dict[str, bool] = {}
        self.meta: dict[str, str] = {}

    def add(self, *row):
        self.rows.append(list(row))

    @property
    def ok(self) -> bool:
        return all(self.criteria.values())

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


# -- subcommands --------------------------------------------------------------------------------

def cmd_exact_bernoulli(cfg: ExperimentConfig) -> Report:
    r, n_max = cfg.r, cfg.n_max
    if r < 1 or n_max < 1:
        raise ConfigError("need r >= 1 and n-max >= 1")
    L = n_max + r - 1
    if L > min(cfg.cap, BERNOULLI_CAP):
        raise CapExceeded(f"word length {L} exceeds cap {min(cfg.cap, BERNOULLI_CAP)}")
    table = RunAvoidanceTable.build(r, L)
    rep = Report(["n", "r", "exact_num", "exact_den", "exact_float", "fs_approx", "thm52_approx", "budget"])
    for n in range(1, n_max + 1):
        L = n + r - 1
        exact = table.nonhit(n)
        # run-length asymptotic on the same window x[1..n+r-1] as the exact value
        fs = fs_run_probability(L, r)[0] if L >= 2 else None
        rep.add(n, r, exact.numerator, exact.denominator, float(exact), fs, halving_approx(n, r),
                math.log(n) / math.sqrt(n))
    return rep


def cmd_exact_gauss(cfg: ExperimentConfig) -> Report:
    ks = range(2, cfg.k_max + 1) if cfg.k_max >= 2 else [cfg.k]
    rep = Report(["n", "k", "lambda_num", "lambda_den", "lambda_float", "mu_float", "branch_count", "budget_hit"])
    for k in ks:
        if k < 2:
            raise ConfigError("k must be >= 2")
        for res in etilde_steps(cfg.n_max, k, cfg.branch_cap, cfg.bit_budget):
            lam = res.lebesgue
            rep.add(res.n, k, lam.numerator, lam.denominator, float(lam), res.mu, res.branch_count, res.budget_hit)
    return rep


def _exact_nonhit_column(cfg: ExperimentConfig, sched, ms: np.ndarray) -> list:
    if cfg.system == "product":
        mu = sched.measures(int(ms[-1]))
        return [math.exp(m * math.log1p(-mu[m - 1])) if mu[m - 1] < 1 else 0.0 for m in ms]
    if cfg.system == "bernoulli":
        r = sched.params(int(ms[-1]))
        out = {}
        for rv in np.unique(r[ms - 1]):
            sel = ms[r[ms - 1] == rv]
            p = avoidance_probabilities(int(sel[-1] + rv - 1), int(rv))
            out.update({int(m): float(p[m + rv - 1]) for m in sel})
        return [out[int(m)] for m in ms]
    # gauss: exact engine only where the branch count stays small
    col = []
    for m in ms:
        k = int(sched.param(int(m)))
        if k == 1:
            col.append(0.0)
        elif (k - 1) ** int(m) <= 10**4:
            res = None
            for res in etilde_steps(int(m), k):
                pass
            col.append(res.mu)
        else:
            col.append(None)
    return col


def cmd_mc_run(cfg: ExperimentConfig) -> Report:
    if not 1 <= cfg.m0 <= cfg.m:
        raise ConfigError("need 1 <= m0 <= m")
    sched = schedule_for(cfg)
    spec = resolve_system(cfg.system, sched, cfg.m, cfg.gauss_method)
    q = Query(horizon=cfg.m, fail_counts=True, first_failure_from=cfg.m0)
    res = run_batch(spec, q, cfg.samples, cfg.seed, cfg.workers, cfg.cap)
    S = cfg.samples
    ms = np.arange(cfg.m0, cfg.m + 1)
    exact = _exact_nonhit_column(cfg, sched, ms)
    mus = sched.measures(cfg.m)
    first = np.sort(res.first_failure)
    rep = Report(["m", "mu_B", "fail_freq", "fail_stderr", "exact_nonhit", "ea_fraction", "ea_stderr"])
    agree = checked = 0
    prev_ea = 1.0
    monotone = True
    for m, ex in zip(ms, exact):
        f = res.fail_counts[m - 1] / S
        se = math.sqrt(f * (1 - f) / S)
        ea = float(np.count_nonzero(first > m)) / S
        monotone &= ea <= prev_ea
        prev_ea = ea
        if ex is not None:
            checked += 1
            agree += abs(f - ex) <= 4 * math.sqrt(ex * (1 - ex) / S) + 1e-15
        rep.add(int(m), float(mus[m - 1]), f, se, ex, ea, math.sqrt(ea * (1 - ea) / S))
    rep.criteria["window-monotonicity"] = monotone
    if checked:
        rep.criteria["oracle-agreement"] = agree >= 0.99 * checked
    rep.meta.update(samples=str(S), escapes=str(res.escapes), oracle_cells=str(checked), oracle_agree=str(agree))
    return rep


def e_measures_for(cfg: ExperimentConfig, N: int) -> tuple[np.ndarray, str]:
    """mu(E_n) for n = 0..N (index n) and a note on how it was obtained."""
    sched = schedule_for(cfg)
    n = np.arange(1, N + 1)
    out = np.ones(N + 1)
    if cfg.system == "product":
        mu = sched.measures(N)
        with np.errstate(divide="ignore"):
            out[1:] = np.exp(n * np.log1p(-mu))
        return out, "exact"
    if cfg.system == "bernoulli":
        r = sched.params(N)
        for rv in np.unique(r):
            sel = n[r == rv]
            p = avoidance_probabilities(int(sel[-1] + rv - 1), int(rv))
            out[sel] = p[sel + rv - 1]
        return out, "exact"
    mu = sched.measures(N)
    # beyond the exact engine's reach: the centre (1 - mu)^(n log 2) of the two-sided envelope
    with np.errstate(divide="ignore"):
        out[1:] = np.exp(n * math.log(2.0) * np.log1p(-mu))
    return out, "envelope-centre"


def cmd_series(cfg: ExperimentConfig) -> Report:
    if cfg.N < 2:
        raise ConfigError("N must be >= 2")
    if cfg.N > cfg.cap:
        raise CapExceeded(f"N={cfg.N} exceeds cap {cfg.cap}")
    e, how = e_measures_for(cfg, cfg.N)
    res = series_partial_sum(e, cfg.eps, cfg.N)
    rep = Report(["n", "term", "partial_sum", "slope", "stderr"])
    seen = []
    for n, s in res.checkpoints:
        if n & (n - 1) == 0:
            seen.append((n, s))
        term = e[n] ** (1.0 - cfg.eps) / n
        rep.add(n, term, s, dyadic_slope(seen), res.stderr)
    rep.meta.update(measure_source=how, final_slope=repr(res.slope))
    return rep


def cmd_classify(cfg: ExperimentConfig) -> Report:
    c = classify_schedule(schedule_for(cfg), cfg.horizon, cfg.burn_in)
    rep = Report(["prediction", "fitted_low", "fitted_high", "cutoff", "m_lo", "m_hi"])
    rep.add(c.prediction.value, c.fitted_low, c.fitted_high, c.cutoff, *c.m_range)
    return rep


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from None


def cmd_mixing(cfg: ExperimentConfig) -> Report:
    digits = _int_list(cfg.digits)
    try:
        B = IntervalUnion.parse(cfg.target)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    gaps = _int_list(cfg.gaps)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    rep = Report(["gap", "deviation", "joint", "mu_a", "mu_b", "method", "stderr"])
    devs = []
    for g in gaps:
        est = mixing_eta_estimate(digits, B, g, cfg.method, cfg.samples, rng)
        rep.add(g, est.deviation, est.joint, est.mu_a, est.mu_b, est.method, est.stderr)
        devs.append((g, est.deviation, est.method))
    positive = sorted((g, d) for g, d, mth in devs if g >= 1 and mth != "mc")
    if len(positive) >= 2:
        rep.criteria["decay-monotone"] = all(b[1] < a[1] for a, b in zip(positive, positive[1:]))
        if all(d > 0 for _, d in positive):
            c, lam = fit_mixing_rate([g for g, _ in positive], [d for _, d in positive])
            rep.meta.update(fit_c=repr(c), fit_lambda=repr(lam))
    return rep


def cmd_selftest(cfg: ExperimentConfig) -> Report:
    from .selftest import run_checks

    rep = Report(["check", "passed", "detail"])
    for name, ok, detail in run_checks():
        rep.add(name, ok, detail)
        rep.criteria[name] = ok
    return rep


COMMANDS = {
    "exact-bernoulli": cmd_exact_bernoulli,
    "exact-gauss": cmd_exact_gauss,
    "mc-run": cmd_mc_run,
    "series": cmd_series,
    "classify": cmd_classify,
    "mixing": cmd_mixing,
    "selftest": cmd_selftest,
}


# -- argument parsing -------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error=usage exit=2 message={json.dumps(message)}", file=sys.stderr)
        raise SystemExit(2)


def _count(text: str) -> int:
    """Integer argument that also accepts forms like 1e6."""
    try:
        return int(text)
    except ValueError:
        v = float(text)
        if not v.is_integer():
            raise argparse.ArgumentTypeError(f"not an integer: {text}")
        return int(v)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shrinklab", description="Shrinking-target non-hitting measures, exact and simulated.")
    p.add_argument("--version", action="version", version=f"shrinklab {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="INI file with an [experiment] section")
        sp.add_argument("--out", help="CSV output path (stdout if omitted)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, help="parallel workers (SHRINKLAB_WORKERS overrides)")
        sp.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
        return sp

    sp = common(sub.add_parser("exact-bernoulli", help="exact mu(E_{n,m}) for a run-length target"))
    sp.add_argument("--n-max", dest="n_max", type=_count)
    sp.add_argument("--r", type=int)
    sp.add_argument("--cap", type=_count)

    sp = common(sub.add_parser("exact-gauss", help="exact interval engine for Gauss digit targets"))
    sp.add_argument("--n-max", dest="n_max", type=_count)
    sp.add_argument("--k", type=int)
    sp.add_argument("--k-max", dest="k_max", type=int)
    sp.add_argument("--branch-cap", dest="branch_cap", type=_count)
    sp.add_argument("--bit-budget", dest="bit_budget", type=_count)

    sp = common(sub.add_parser("mc-run", help="simulate hit records and windowed eventually-always fractions"))
    sp.add_argument("--system", choices=("product", "bernoulli", "gauss"))
    sp.add_argument("--schedule")
    sp.add_argument("--samples", type=_count)
    sp.add_argument("--m0", type=_count)
    sp.add_argument("--m", type=_count)
    sp.add_argument("--gauss-method", dest="gauss_method", choices=("auto", "iterate", "chain"))
    sp.add_argument("--cap", type=_count)

    sp = common(sub.add_parser("series", help="partial sums of mu(E_n)^(1-eps)/n"))
    sp.add_argument("--system", choices=("product", "bernoulli", "gauss"))
    sp.add_argument("--schedule")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--N", type=_count)
    sp.add_argument("--cap", type=_count)

    sp = common(sub.add_parser("classify", help="which loglog threshold branch a schedule follows"))
    sp.add_argument("--system", choices=("product", "bernoulli", "gauss"))
    sp.add_argument("--schedule")
    sp.add_argument("--horizon", type=_count)
    sp.add_argument("--burn-in", dest="burn_in", type=_count)

    sp = common(sub.add_parser("mixing", help="mixing deviation of a digit cylinder against an interval target"))
    sp.add_argument("--digits", help="comma-separated leading digits of the cylinder")
    sp.add_argument("--target", help='interval union such as "[0,1/2]"')
    sp.add_argument("--gaps", help="comma-separated gaps")
    sp.add_argument("--method", choices=("auto", "exact", "transfer", "mc"))
    sp.add_argument("--samples", type=_count)

    common(sub.add_parser("selftest", help="exhaustive small-instance oracle checks"))
    return p


def resolve_config(ns: argparse.Namespace) -> ExperimentConfig:
    base = ExperimentConfig.from_file(ns.config) if ns.config else ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    given = {k: v for k, v in vars(ns).items() if k in known and v is not None}
    given["subcommand"] = ns.subcommand
    return base.updated(**given)


def _git_hash() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        return out.stdout.strip() if out.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        return ""


def write_outputs(rep: Report, cfg: ExperimentConfig, wall: float, out=None):
    text = rep.csv_text()
    if not cfg.out:
        (out or sys.stdout).write(text)
        return
    path = Path(cfg.out)
    path.write_text(text, newline="")
    meta = {
        "tool": "shrinklab",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": str(cfg.seed),
        "git_hash": _git_hash(),
        "wall_time_s": f"{wall:.3f}",
    }
    meta.update({f"criterion.{k}": "pass" if v else "fail" for k, v in rep.criteria.items()})
    meta.update(rep.meta)
    for line in cfg.to_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[f"config.{k.strip()}"] = v.strip()
    Path(str(path) + ".meta").write_text("".join(f"{k}={v}\n" for k, v in meta.items()))


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns)
        if ns.print_config:
            sys.stdout.write(cfg.to_text())
            return 0
        t0 = time.perf_counter()
        rep = COMMANDS[cfg.subcommand](cfg)
        write_outputs(rep, cfg, time.perf_counter() - t0)
    except ShrinkError as exc:
        print(f"error={exc.reason} exit={exc.exit_code} message={json.dumps(str(exc))}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OverflowError) as exc:
        print(f"error=invalid-input exit=2 message={json.dumps(str(exc))}", file=sys.stderr)
        return 2
    except MemoryError:
        print("error=out-of-memory exit=3 message=\"\"", file=sys.stderr)
        return 3
    failed = [k for k, v in rep.criteria.items() if not v]
    for k in failed:
        print(f"error=criterion-failed exit=1 criterion={k}", file=sys.stderr)
    return 1 if failed else 0


def main() -> None:
    sys.exit(run())
