"""Command-line surface: benchmark, full, partial, pareto, simulate, check.

All CSV output uses UTF-8, LF line endings and shortest round-trip float
formatting, so identical inputs give byte-identical files. Exit codes:
0 success, 1 validation error, 2 solver failure, 64 usage.
"""

import argparse
import os
import sys

from .domain import ZERO_EXCHANGE
from .full_coop import ConvergenceError, pareto_sweep, solve_weighted_sum
from .intra import InfeasibleBandwidthError, solve_benchmark
from .partial_coop import CoopBranch, improvement_conditions, run_algorithm1
from .sim import (
    ConfigError,
    build_scenario,
    parse_config,
    read_trace,
    simulate_trace,
    verify_benchmark,
    verify_exchange_point,
    verify_full_result,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _fmt(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    text = ",".join(header) + "\n"
    for row in rows:
        text += ",".join(str(c) if isinstance(c, (str, int)) else _fmt(c)
                         for c in row) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _build_parser():
    top = _Parser(prog="specshare",
                  description="Energy and spectrum cooperation solvers "
                              "for two-BS scenarios")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="scenario config (JSON)")
        p.add_argument("--out", default=None, help="write CSV here "
                                                   "(default: stdout)")
        p.add_argument("--verify", action="store_true",
                       help="re-assert budget/QoS residuals on results")

    p = sub.add_parser("benchmark", help="non-cooperative per-BS optimum")
    common(p)

    p = sub.add_parser("full", help="centralized weighted-sum optimum")
    common(p)
    p.add_argument("--gamma1", type=float, default=0.5,
                   help="weight t in gamma=(t, 1-t), 0 < t < 1")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=10_000)

    p = sub.add_parser("partial", help="distributed proportional descent")
    common(p)
    p.add_argument("--delta", type=float, required=True, help="step size")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--rho", type=float, help="cost-reduction ratio")
    group.add_argument("--proportional", action="store_true",
                       help="set rho to the benchmark cost ratio")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--bandwidth-unit", type=float, default=1e6,
                   help="Hz per spectrum step unit (default MHz)")

    p = sub.add_parser("pareto", help="sweep the cost-region boundary")
    common(p)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("simulate", help="time-slotted trace run")
    common(p)
    p.add_argument("--trace", required=True, help="CSV trace path")
    p.add_argument("--mode", required=True, choices=["none", "partial", "full"])
    p.add_argument("--gamma1", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.05)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--rho", type=float)
    group.add_argument("--proportional", action="store_true")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--bandwidth-unit", type=float, default=1e6)
    p.add_argument("--threads", type=int, default=None,
                   help="slot-level parallelism (overrides SPECSHARE_THREADS)")

    p = sub.add_parser("check", help="validate a config and report the "
                                     "mutual-benefit verdict")
    p.add_argument("config")
    return top


def _gamma_pair(gamma1):
    if not (0.0 < gamma1 < 1.0):
        raise ConfigError("--gamma1 must lie strictly between 0 and 1")
    return (gamma1, 1.0 - gamma1)


def _cmd_benchmark(args):
    cfg = parse_config(args.config)
    scenario = build_scenario(cfg)
    results = solve_benchmark(scenario)
    if args.verify:
        verify_benchmark(scenario, results)
    for i, res in enumerate(results):
        print(f"bs{i + 1}: cost={_fmt(res.cost)} renewable={_fmt(res.alloc.renewable)} "
              f"grid={_fmt(res.alloc.grid)} mu={_fmt(res.duals.mu)} "
              f"lam={_fmt(res.duals.lam)}")
    print(f"total: {_fmt(results[0].cost + results[1].cost)}")
    rows = []
    for i, res in enumerate(results):
        for j, ((b, p), mt) in enumerate(zip(res.alloc.per_mt, scenario.mts[i])):
            rows.append((i + 1, j, mt.channel_gain, mt.qos_rate, b, p))
    if args.out is not None:
        _write_csv(args.out,
                   ["bs", "mt", "channel_gain", "qos_rate_bps",
                    "bandwidth_hz", "power_w"], rows)
    return EXIT_OK


def _cmd_full(args):
    cfg = parse_config(args.config)
    scenario = build_scenario(cfg)
    gamma = _gamma_pair(args.gamma1)
    res = solve_weighted_sum(scenario, gamma, tol=args.tol,
                             max_iters=args.max_iters)
    if args.verify:
        verify_full_result(scenario, res)
    print(f"weighted_sum={_fmt(res.weighted_sum)} c1={_fmt(res.costs.c1)} "
          f"c2={_fmt(res.costs.c2)} iterations={res.iterations}")
    x = res.x_ex
    print(f"exchange: e1={_fmt(x.e1)} e2={_fmt(x.e2)} w1={_fmt(x.w1)} "
          f"w2={_fmt(x.w2)}")
    _write_csv(args.out,
               ["gamma1", "gamma2", "c1", "c2", "weighted_sum",
                "e1", "e2", "w1", "w2"],
               [(gamma[0], gamma[1], res.costs.c1, res.costs.c2,
                 res.weighted_sum, x.e1, x.e2, x.w1, x.w2)])
    return EXIT_OK


def _cmd_partial(args):
    cfg = parse_config(args.config)
    scenario = build_scenario(cfg)
    rho = "proportional" if args.proportional else args.rho
    traj = run_algorithm1(scenario, args.delta, rho,
                          max_iters=args.max_iters,
                          bandwidth_unit_hz=args.bandwidth_unit)
    if args.verify:
        end = traj.final()
        verify_exchange_point(scenario, end.x_ex, end.costs)
    rows = []
    last = len(traj.points) - 1
    for k, pt in enumerate(traj.points):
        rows.append((k, pt.x_ex.e1, pt.x_ex.e2, pt.x_ex.w1, pt.x_ex.w2,
                     pt.costs.c1, pt.costs.c2, pt.sigma,
                     traj.termination_reason if k == last else ""))
    _write_csv(args.out,
               ["iter", "e1", "e2", "w1", "w2", "c1", "c2", "sigma",
                "termination"], rows)
    end = traj.final()
    print(f"rho={_fmt(traj.rho)} iterations={last} "
          f"termination={traj.termination_reason}")
    print(f"final: c1={_fmt(end.costs.c1)} c2={_fmt(end.costs.c2)}")
    return EXIT_OK


def _cmd_pareto(args):
    cfg = parse_config(args.config)
    scenario = build_scenario(cfg)
    sweep = pareto_sweep(scenario, args.points, tol=args.tol)
    rows = [(g[0], g[1], c.c1, c.c2, x.e1, x.e2, x.w1, x.w2)
            for g, c, x in sweep]
    _write_csv(args.out,
               ["gamma1", "gamma2", "c1", "c2", "e1", "e2", "w1", "w2"], rows)
    print(f"pareto: {len(rows)} points")
    return EXIT_OK


def _cmd_simulate(args):
    cfg = parse_config(args.config)
    trace = read_trace(args.trace)
    params = {"gamma": _gamma_pair(args.gamma1),
              "delta": args.delta,
              "rho": "proportional" if args.proportional or args.rho is None
              else args.rho,
              "bandwidth_unit_hz": args.bandwidth_unit}
    if args.max_iters is not None:
        params["max_iters"] = args.max_iters
    result = simulate_trace(cfg, trace, args.mode, params,
                            verify=args.verify, threads=args.threads)
    rows = []
    for s in result.slots:
        rows.append((s.row.slot, s.row.ebar1_w, s.row.ebar2_w,
                     s.row.k1, s.row.k2,
                     s.costs.c1, s.costs.c2,
                     s.x_ex[0], s.x_ex[1], s.x_ex[2], s.x_ex[3],
                     s.bench.c1, s.bench.c2, s.status))
    _write_csv(args.out,
               ["slot", "ebar1_w", "ebar2_w", "k1", "k2", "c1", "c2",
                "e1", "e2", "w1", "w2", "bench_c1", "bench_c2", "status"],
               rows)
    print(f"slots: {len(result.slots)}  failed: {result.failed}")
    print(f"total cost none: {_fmt(result.total_bench)}")
    print(f"total cost {result.mode}: {_fmt(result.total_cost)}")
    if result.mode != "none":
        print(f"{result.mode} cooperation: {result.reduction_pct:.2f}% "
              f"total cost reduction")
    return EXIT_SOLVER if result.failed else EXIT_OK


def _cmd_check(args):
    cfg = parse_config(args.config)
    scenario = build_scenario(cfg)
    results = solve_benchmark(scenario)
    duals = (results[0].duals, results[1].duals)
    k = (len(scenario.mts[0]), len(scenario.mts[1]))
    print(f"config OK: K=({k[0]}, {k[1]}), "
          f"beta_e={_fmt(scenario.energy_coop_beta)}, "
          f"beta_b={scenario.spectrum_coop_beta}")
    print(f"dual prices at zero exchange: mu1={_fmt(duals[0].mu)} "
          f"lam1={_fmt(duals[0].lam)} mu2={_fmt(duals[1].mu)} "
          f"lam2={_fmt(duals[1].lam)}")
    branch = improvement_conditions(duals, ZERO_EXCHANGE,
                                    scenario.energy_coop_beta)
    if branch is CoopBranch.SHARE_E1_FOR_W2:
        print("partial cooperation FEASIBLE: lam1/mu1 > lam2/(mu2*betaE)")
    elif branch is CoopBranch.SHARE_E2_FOR_W1:
        print("partial cooperation FEASIBLE: lam2/mu2 > lam1/(mu1*betaE)")
    else:
        print("partial cooperation INFEASIBLE: neither marginal-price "
              "condition holds")
    return EXIT_OK


_COMMANDS = {
    "benchmark": _cmd_benchmark,
    "full": _cmd_full,
    "partial": _cmd_partial,
    "pareto": _cmd_pareto,
    "simulate": _cmd_simulate,
    "check": _cmd_check,
}


def cli_main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if err.code is not None else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as err:
        sys.stderr.write(f"specshare: validation error: {err}\n")
        return EXIT_VALIDATION
    except (ConvergenceError, InfeasibleBandwidthError, AssertionError) as err:
        sys.stderr.write(f"specshare: solver error: {err}\n")
        return EXIT_SOLVER
    except ValueError as err:
        sys.stderr.write(f"specshare: validation error: {err}\n")
        return EXIT_VALIDATION


def main():
    raise SystemExit(cli_main())
