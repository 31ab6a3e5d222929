"""Command-line harness: regenerate tables and curves, run estimation, self-test."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .circuit import CircuitConfig, Detector, parse_angle, standard_config
from .engines import ENGINES, conditional_distribution
from .efficiency import (TABLE_NMIN, TABLE_THRESHOLDS, corrected_sweep, minn_table, quality_table,
                         uncorrected_sweep)
from .feedforward import plan
from .metrology import (EstimationRun, bayesian_estimate, conditional_state, fringe_distribution,
                        noon_state)
from .phase import exact_transmission
from .quality import report

NORMALIZATION_TOL = 1e-12
FRINGE_TOL = 1e-10


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output plumbing

def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def run_manifest(args, outputs, wall: float, seed=None) -> dict:
    params = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return {
        "subcommand": args.command,
        "parameters": params,
        "engine": getattr(args, "engine", None),
        "seed": seed,
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "wall_time_s": round(wall, 6),
    }


def gnuplot_script(csv_path: Path, xlabel: str, ylabel: str = "probability") -> str:
    return (
        "set datafile separator ','\n"
        f"set xlabel '{xlabel}'\n"
        f"set ylabel '{ylabel}'\n"
        "set key off\n"
        f"plot '{csv_path.name}' every ::1 using 1:2 with linespoints pt 7\n"
        "pause -1\n"
    )


def emit(args, text: str, suffix: str, xlabel: Optional[str] = None) -> list:
    """Write ``text`` to --out (or stdout); returns the files written."""
    if args.out is None:
        sys.stdout.write(text)
        return []
    out = Path(args.out)
    write_atomic(out, text)
    files = [out]
    if args.gnuplot and xlabel is not None and out.suffix == ".csv":
        gp = out.with_suffix(".gp")
        write_atomic(gp, gnuplot_script(out, xlabel))
        files.append(gp)
    return files


def finish(args, files, t0, seed=None):
    if args.out is None:
        return
    man = run_manifest(args, files, time.perf_counter() - t0, seed)
    write_atomic(Path(str(args.out) + ".manifest.json"), json.dumps(man, indent=2) + "\n")


def _is_json(args) -> bool:
    return args.out is not None and str(args.out).endswith(".json")


# ---------------------------------------------------------------------------
# subcommands

def _parse_T(text: str, auto):
    if text in ("auto", None):
        return auto
    try:
        t = Fraction(text)
    except ValueError as exc:
        raise UsageError(f"--T must be auto, exact, or a number: {text!r}") from exc
    if not 0 <= t <= 1:
        raise UsageError("--T must lie in [0, 1]")
    return t


def cmd_dist(args) -> int:
    t0 = time.perf_counter()
    na, nb, m1, m2 = args.na, args.nb, args.m1, args.m2
    if min(na, nb, m1, m2) < 0:
        raise UsageError("counts must be nonnegative")
    if m1 + m2 > na + nb:
        raise UsageError(f"m1 + m2 = {m1 + m2} exceeds N = {na + nb}")
    if args.set == "56":
        if args.m9 is not None:
            raise UsageError("--m9 applies only to the corrected sets")
        xi = 0.0 if args.xi == "auto" else parse_angle(args.xi)
        t = _parse_T(args.T, Fraction(1))
        cfg = CircuitConfig(na, nb, xi=xi, transmission=t)
        fixed, free = {Detector.D1: m1, Detector.D2: m2}, Detector.D5
    else:
        N = na + nb
        if m1 + m2 == 0 and (args.T in ("auto", "exact") or args.xi == "auto"):
            raise UsageError("m1 = m2 = 0: the feedforward plan is undefined; give --T and --xi")
        p = plan(N, m1, m2, N_alpha=na) if m1 + m2 else None
        m9 = args.m9 if args.m9 is not None else p.most_probable_m9
        if m9 < 0 or m1 + m2 + m9 > N:
            raise UsageError(f"m1 + m2 + m9 = {m1 + m2 + m9} exceeds N = {N}")
        if args.T == "exact":
            lo, hi = min(m1, m2), max(m1, m2)
            t = exact_transmission(N, hi, lo, m9)
            if not 0 <= t <= 1:
                raise UsageError(f"peak-matching T = {t} lies outside [0, 1]")
        else:
            t = _parse_T(args.T, p.transmission if p else None)
        cfg = standard_config(na, nb, m1, m2, t)
        if args.xi != "auto":
            cfg = cfg.replace(xi=parse_angle(args.xi))
        fixed = {Detector.D1: m1, Detector.D2: m2, Detector.D9: m9}
        free = Detector.D7 if args.set == "789" else Detector.D5P
    try:
        dist = conditional_distribution(cfg, fixed, free, args.engine)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    norm_dev = abs(math.fsum(dist.probabilities) - 1)
    summary = {"config": cfg.to_dict(), "conditioning": dist.conditioning, "total": dist.total}
    if dist.n > 0:
        summary.update(report(dist).to_dict())
    if _is_json(args):
        doc = dist.to_dict(exact_strings=args.engine == "exact")
        doc.pop("notes", None)
        doc.update({"config": cfg.to_dict(), "summary": summary})
        text = json.dumps(doc, indent=2) + "\n"
    else:
        text = dist.to_csv()
    files = emit(args, text, "csv", f"m{free.value}")
    if args.out is not None:
        print(json.dumps(summary, indent=2))
    finish(args, files, t0)
    if norm_dev > NORMALIZATION_TOL:
        print(f"normalization check failed: |sum - 1| = {norm_dev:.2e}", file=sys.stderr)
        return 1
    return 0


def _parse_rows(text: str):
    rows = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        a, b = part.split(",")
        rows.append((int(a), int(b)))
    if not rows:
        raise UsageError("--rows needs at least one 'm1,m2' pair")
    return rows


def cmd_table_quality(args) -> int:
    t0 = time.perf_counter()
    rows = _parse_rows(args.rows)
    for m1, m2 in rows:
        if m1 < 0 or m2 < 0 or m1 + m2 > args.n or m1 + m2 == 0:
            raise UsageError(f"row ({m1},{m2}) is not valid for N = {args.n}")
    table = quality_table(args.n, rows, args.engine, args.threads)
    if _is_json(args):
        text = json.dumps({"N": args.n, "rows": [r.to_dict() for r in table]}, indent=2) + "\n"
    elif args.out is not None:
        lines = ["m1,m2,m78,m9,T,q1,q2"]
        lines += [f"{r.m1},{r.m2},{r.m78},{r.m9},{float(r.transmission)!r},{r.q1!r},{r.q2!r}" for r in table]
        text = "\n".join(lines) + "\n"
    else:
        head = f"{'m1':>4} {'m2':>4} {'m78':>5} {'<m9>':>5} {'T':>6} {'q1':>7} {'q2':>7}"
        lines = [head]
        lines += [f"{r.m1:>4} {r.m2:>4} {r.m78:>5} {r.m9:>5} {float(r.transmission):>6.2f} "
                  f"{r.q1:>7.3f} {r.q2:>7.3f}" for r in table]
        text = "\n".join(lines) + "\n"
    files = emit(args, text, "csv")
    finish(args, files, t0)
    return 0


def _float_list(text):
    return tuple(float(x) for x in text.split(","))


def _int_list(text):
    return tuple(int(x) for x in text.split(","))


def cmd_table_minn(args) -> int:
    t0 = time.perf_counter()
    ths, nms = _float_list(args.thresholds), _int_list(args.nmin)
    table = minn_table(args.n, ths, nms, None if args.decimals < 0 else args.decimals,
                       engine=args.engine, threads=args.threads)
    if _is_json(args):
        doc = {"N": args.n, "cells": [{"N_min": nm, "q1": th, "percent": table[(th, nm)]}
                                       for nm in nms for th in ths]}
        text = json.dumps(doc, indent=2) + "\n"
    elif args.out is not None:
        lines = ["N_min," + ",".join(f"q1={th:g}" for th in ths)]
        lines += [f"{nm}," + ",".join(repr(table[(th, nm)]) for th in ths) for nm in nms]
        text = "\n".join(lines) + "\n"
    else:
        lines = [f"{'N_min':>6} " + " ".join(f"{'% q1=' + format(th, 'g'):>12}" for th in ths)]
        lines += [f"{nm:>6} " + " ".join(f"{table[(th, nm)]:>12.2f}" for th in ths) for nm in nms]
        text = "\n".join(lines) + "\n"
    files = emit(args, text, "csv")
    finish(args, files, t0)
    return 0


def cmd_efficiency(args) -> int:
    t0 = time.perf_counter()
    if not 0 <= args.m78 <= args.n:
        raise UsageError("need 0 <= --m78 <= --n")
    try:
        if args.mode == "corrected":
            rep = corrected_sweep(args.n, args.m78, engine=args.engine, threads=args.threads)
        else:
            rep = uncorrected_sweep(args.n, args.m78, engine=args.engine, threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    summary = {"mode": args.mode, "N": args.n, "m78": args.m78, "total_probability": rep.total,
               "quality": None if rep.quality is None else rep.quality.to_dict()}
    text = rep.to_json() + "\n" if _is_json(args) else rep.to_csv()
    files = emit(args, text, "csv")
    if args.out is not None or not _is_json(args):
        print(json.dumps(summary, indent=2), file=sys.stderr if args.out is None else sys.stdout)
    finish(args, files, t0)
    return 0


def cmd_fringes(args) -> int:
    t0 = time.perf_counter()
    if min(args.na, args.nb, args.m1, args.m2) < 0 or args.m1 + args.m2 > args.na + args.nb:
        raise UsageError("inconsistent counts")
    try:
        d = fringe_distribution(args.na, args.nb, args.m1, args.m2, args.engine)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dev = d.notes["fixture_max_dev"]
    text = (json.dumps(d.to_dict(), indent=2) + "\n") if _is_json(args) else d.to_csv()
    files = emit(args, text, "csv", "m7")
    finish(args, files, t0)
    if dev > FRINGE_TOL:
        print(f"fixture cross-check failed: max deviation {dev:.2e}", file=sys.stderr)
        return 1
    return 0


def _parse_prior(text: str, n: int):
    kind, _, rest = text.partition(":")
    if kind == "global":
        return ("global",)
    if kind == "local":
        return ("local", float(rest) if rest else math.pi / (8 * max(n, 1)))
    if kind == "uniform":
        lo, hi = (float(x) for x in rest.split(","))
        return ("uniform", lo, hi)
    raise UsageError(f"unknown prior {text!r}")


def cmd_estimate(args) -> int:
    t0 = time.perf_counter()
    if args.t < 0 or args.nu < 1:
        raise UsageError("need --t >= 0 and --nu >= 1")
    circuit = [args.na, args.nb, args.m1, args.m2, args.m9]
    if any(v is not None for v in circuit):
        if any(v is None for v in circuit):
            raise UsageError("a circuit state needs --na --nb --m1 --m2 --m9")
        cfg = standard_config(args.na, args.nb, args.m1, args.m2)
        try:
            psi = conditional_state(cfg, {Detector.D1: args.m1, Detector.D2: args.m2, Detector.D9: args.m9})
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        psi = noon_state(args.n)
    n = len(psi) - 1
    run = EstimationRun(args.chi, args.t, args.nu, args.seed, _parse_prior(args.prior, n), args.grid)
    res = bayesian_estimate(run, psi)
    text = res.to_json() + "\n"
    files = emit(args, text, "json")
    finish(args, files, t0, seed=args.seed)
    return 0


def cmd_selftest(args) -> int:
    from .acceptance import run_all
    crit = _int_list(args.criteria) if args.criteria else None
    results = run_all(crit, echo=print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if args.out is not None:
        doc = [{"criterion": r.criterion, "check": r.key, "passed": r.passed, "detail": r.detail,
                "seconds": round(r.seconds, 3)} for r in results]
        write_atomic(Path(args.out), json.dumps(doc, indent=2) + "\n")
    return 0 if not failed else 1


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--engine", choices=ENGINES, default="float",
                        help="exact: rational sums; float: double-precision integral; integral: auto precision")
    common.add_argument("--out", default=None, help="output file (.csv or .json); stdout if omitted")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes for sweeps (default: NOON_FORGE_THREADS or CPU count)")
    common.add_argument("--gnuplot", action="store_true", help="write a companion .gp plot script next to CSV output")

    p = argparse.ArgumentParser(prog="noon-forge", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dist", parents=[common], help="conditional output distribution")
    d.add_argument("--na", type=int, required=True)
    d.add_argument("--nb", type=int, required=True)
    d.add_argument("--m1", type=int, required=True)
    d.add_argument("--m2", type=int, required=True)
    d.add_argument("--m9", type=int, default=None, help="D9 count (default: feedforward most probable value)")
    d.add_argument("--T", default="auto", help="auto (feedforward), exact (peak-matching for m9), or a value")
    d.add_argument("--xi", default="auto", help="auto, or an angle such as -pi/2")
    d.add_argument("--set", choices=("56", "789", "5p69"), default="789")
    d.set_defaults(func=cmd_dist)

    t = sub.add_parser("table-quality", parents=[common], help="q1, q2 per (m1, m2) row")
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--rows", default="45,5;40,10;35,15;30,20;25,25")
    t.set_defaults(func=cmd_table_quality)

    m = sub.add_parser("table-minn", parents=[common], help="uncorrected acceptance probabilities")
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--thresholds", default=",".join(str(x) for x in TABLE_THRESHOLDS))
    m.add_argument("--nmin", default=",".join(str(x) for x in TABLE_NMIN))
    m.add_argument("--decimals", type=int, default=2, help="round q1 before comparing; negative compares raw")
    m.set_defaults(func=cmd_table_minn)

    e = sub.add_parser("efficiency", parents=[common], help="sweep and averaged NOON at fixed output number")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--m78", type=int, required=True, help="output number (m5 + m6 in uncorrected mode)")
    e.add_argument("--mode", choices=("corrected", "uncorrected"), default="corrected")
    e.set_defaults(func=cmd_efficiency)

    f = sub.add_parser("fringes", parents=[common], help="m7 distribution of the uncorrected readout")
    f.add_argument("--na", type=int, required=True)
    f.add_argument("--nb", type=int, required=True)
    f.add_argument("--m1", type=int, required=True)
    f.add_argument("--m2", type=int, required=True)
    f.set_defaults(func=cmd_fringes)

    s = sub.add_parser("estimate", parents=[common], help="seeded Bayesian phase estimation")
    s.add_argument("--chi", type=float, required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--nu", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--n", type=int, default=4, help="NOON size when no circuit state is given")
    s.add_argument("--prior", default="local", help="local[:half_width], global, or uniform:lo,hi")
    s.add_argument("--grid", type=int, default=2048)
    for name in ("na", "nb", "m1", "m2", "m9"):
        s.add_argument(f"--{name}", type=int, default=None)
    s.set_defaults(func=cmd_estimate)

    st = sub.add_parser("selftest", help="run the acceptance checks")
    st.add_argument("--criteria", default=None, help="comma-separated criterion numbers")
    st.add_argument("--out", default=None, help="JSON report path")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"noon-forge {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
