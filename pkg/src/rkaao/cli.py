"""Command-line entry point: ``rkaao <subcommand> ...``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import DEFAULTS_HELP, parse_config
from .drivers import discretize, dof_count, resolve_nt, run_allatonce, run_experiment
from .exceptions import ConfigError, RkaaoError
from .report import emit_report
from .tableaux import Family, format_tableau, make_tableau, rk_factorization

EXIT_OK, EXIT_FAIL, EXIT_NOCONV = 0, 1, 2


def _load_config(args, **overrides):
    if args.config is None:
        raise ConfigError("--config is required for this subcommand")
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
    if getattr(args, "threads", None):
        overrides["threads"] = args.threads
    return cfg.with_(**overrides) if overrides else cfg


def _write(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_tableau(args):
    t = make_tableau(Family.parse(args.family), args.s)
    f = rk_factorization(t)
    lines = [format_tableau(t), f"singular values: {' '.join(f'{v:.12g}' for v in f.sigma)}",
             f"min Re spec(U^T V): {f.min_real_w:.6g}"]
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_info(args):
    cfg = _load_config(args)
    t = make_tableau(Family.parse(cfg.family), cfg.s)
    d = discretize(cfg)
    n_t = resolve_nt(cfg, d, t)
    dof = dof_count(cfg.kind, d, t.s, n_t, cfg.all_at_once)
    lines = [f"problem: {cfg.problem}", f"method: {t.name} (order {t.order})", f"level: {cfg.l}, degree: {cfg.fe_degree}",
             f"t_f: {cfg.final_time}, n_t: {n_t}", f"unknowns: {dof}"]
    lines += [f"{k}: {v}" for k, v in d.summary().items()]
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_solve(args):
    cfg = _load_config(args)
    report, _ = run_experiment(cfg)
    out = args.out or cfg.output
    text = emit_report([report], out)
    if not out:
        sys.stdout.write(text)
    if not report.converged:
        print(f"not converged: {report.notes}", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


def cmd_spectrum(args):
    from .fem2d import assemble_heat
    from .stage_precond import prk_spectrum

    t = make_tableau(Family.parse(args.family), args.s)
    d = assemble_heat(args.l, args.degree)
    ev = prk_spectrum(t, args.tau, d)
    rows = ["re,im"] + [f"{z.real:.12g},{z.imag:.12g}" for z in ev]
    _write("\n".join(rows) + "\n", args.out)
    print(f"max |lambda| = {np.abs(ev).max():.12g}, min Re lambda = {ev.real.min():.12g}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args):
    cfg = _load_config(args)
    if not cfg.all_at_once:
        raise ConfigError("bench needs an all-at-once problem")
    rows = ["threads,t_theta_s,t_schur_s,t_total_s,outer_iters"]
    status = EXIT_OK
    for nthr in sorted({1, max(1, args.threads or 2)}):
        report, _ = run_allatonce(cfg.with_(threads=nthr))
        rows.append(f"{nthr},{report.t_theta_s:.6g},{report.t_schur_s:.6g},{report.t_total_s:.6g},{report.outer_iters}")
        if not report.converged:
            status = EXIT_NOCONV
    _write("\n".join(rows) + "\n", args.out)
    return status


def cmd_reproduce(args):
    from .reproduce import run_cells

    n_fail = 0
    lines = []
    for cell, report, checks in run_cells(threads=args.threads or 1):
        for name, val, ref, ok in checks:
            n_fail += not ok
            line = f"{'PASS' if ok else 'FAIL'}  {cell.label:34s} {name:16s} got {val} expected {ref}"
            print(line, flush=True)
            lines.append(line)
    if args.out:
        _write("\n".join(lines) + "\n", args.out)
    print(f"{n_fail} check(s) failed" if n_fail else "all checks passed")
    return EXIT_OK if n_fail == 0 else EXIT_NOCONV


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--threads", type=int, default=None, help="threads for the stage-solve phase")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")

    p = argparse.ArgumentParser(prog="rkaao", description="Runge-Kutta all-at-once solvers.", epilog=DEFAULTS_HELP)
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("tableau", parents=[common], help="print a Butcher tableau and its SVD data")
    sp.add_argument("family")
    sp.add_argument("s", type=int)
    sp.set_defaults(func=cmd_tableau)
    sub.add_parser("info", parents=[common], help="discretization summary").set_defaults(func=cmd_info)
    sub.add_parser("solve", parents=[common], help="run one experiment and emit CSV",
                   epilog=DEFAULTS_HELP).set_defaults(func=cmd_solve)
    sp = sub.add_parser("spectrum", parents=[common], help="dense eigenvalues of the preconditioned heat stage matrix")
    sp.add_argument("--family", default="gauss")
    sp.add_argument("--s", type=int, default=2)
    sp.add_argument("--l", type=int, default=3)
    sp.add_argument("--degree", type=int, default=1)
    sp.add_argument("--tau", type=float, default=0.2)
    sp.set_defaults(func=cmd_spectrum)
    sub.add_parser("bench", parents=[common], help="stage-phase timings at 1 and N threads").set_defaults(func=cmd_bench)
    sub.add_parser("reproduce", parents=[common], help="check curated table cells").set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (RkaaoError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
