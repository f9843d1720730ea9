"""Command-line interface: run scenarios, sweep failure times, render reports.

    ckptsim run scenario2 --out results/
    ckptsim sweep scenario2 --times 1900,2500,3100
    ckptsim report results/

Scenario arguments are file paths, or names of bundled scenarios
(scenario1 .. scenario6).  The default output directory is $CKPTSIM_OUT,
falling back to ./out.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from . import engine
from .engine import ScriptError, SimResult
from .model import SleepThresholds, WaitAction, WaitMode
from .scenario import FailureSpec, Scenario, ScenarioError, bundled_path, load_scenario
from .traceio import emit_csv, emit_pcf, emit_prv

SAVINGS_HEADER = ("scenario,node,compute_action,t_comp_min,wait_action,t_wait_min,"
                  "tt_min,eni_j,save_j,save_j_per_s_wait,save_j_per_s_total,save_pct")


@dataclass(frozen=True)
class SavingsRow:
    scenario: str
    node: int
    compute_action: str
    t_comp_min: float
    wait_action: str
    t_wait_min: float
    tt_min: float
    eni_j: float
    save_j: float
    save_j_per_s_wait: float
    save_j_per_s_total: float
    save_pct: float

    def to_csv(self) -> str:
        return (f"{self.scenario},{self.node},{self.compute_action},"
                f"{self.t_comp_min:.2f},{self.wait_action},{self.t_wait_min:.2f},"
                f"{self.tt_min:.2f},{self.eni_j:.2f},{self.save_j:.2f},"
                f"{self.save_j_per_s_wait:.2f},{self.save_j_per_s_total:.2f},"
                f"{self.save_pct:.2f}")


def _wait_action_label(action: WaitAction, scenario: Scenario) -> str:
    if action is WaitAction.SLEEP:
        return "sleep"
    if action is WaitAction.MIN_FREQ:
        return scenario.freq_table.min_level.label
    return "No action"


def build_rows(result: SimResult) -> list[SavingsRow]:
    """One row per surviving node, Table-style; unaffected nodes carry zeros."""
    sc = result.scenario
    rows = []
    for node in sorted(result.savings):
        saving = result.savings[node]
        plan = saving.plan
        if saving.window is None:
            rows.append(SavingsRow(sc.name, node, "No action", 0.0, "No action",
                                   0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0))
            continue
        start, end = saving.window
        total_s = end - start
        if plan is not None:
            busy = plan.predicted.t_comp_f + plan.predicted.t_ckpt_total
            wait = plan.predicted.t_wait
            compute_action = ("No action" if plan.compute_freq is sc.freq_table.max_level
                              else plan.compute_freq.label)
            wait_action = _wait_action_label(plan.wait_action, sc)
        else:
            # affected but not intervened: read phase durations off the baseline
            blocked = sum(iv.end - iv.start
                          for iv in result.baseline.ledgers[node]
                          if iv.phase.value.startswith("blocked")
                          and iv.start >= start and iv.end <= end)
            busy, wait = total_s - blocked, blocked
            compute_action, wait_action = "No action", "No action"
        rows.append(SavingsRow(
            scenario=sc.name, node=node,
            compute_action=compute_action, t_comp_min=busy / 60.0,
            wait_action=wait_action, t_wait_min=wait / 60.0,
            tt_min=total_s / 60.0, eni_j=saving.eni_j, save_j=saving.saving_j,
            save_j_per_s_wait=saving.saving_j / wait if wait > 0.0 else 0.0,
            save_j_per_s_total=saving.saving_j / total_s if total_s > 0.0 else 0.0,
            save_pct=100.0 * saving.saving_j / saving.eni_j if saving.eni_j > 0.0 else 0.0,
        ))
    return rows


_TABLE_FMT = "{:>4} {:<12} {:>9} {:<10} {:>9} {:>8} {:>13} {:>11} {:>11} {:>9}"


def format_table(rows: list[SavingsRow]) -> str:
    lines = [_TABLE_FMT.format("N", "Compute", "T (m)", "Wait", "T (m)", "TT (m)",
                               "Save (J)", "J/s wait", "J/s total", "Save (%)")]
    for r in rows:
        lines.append(_TABLE_FMT.format(
            r.node, r.compute_action, f"{r.t_comp_min:.2f}", r.wait_action,
            f"{r.t_wait_min:.2f}", f"{r.tt_min:.2f}", f"{r.save_j:,.2f}",
            f"{r.save_j_per_s_wait:.2f}", f"{r.save_j_per_s_total:.2f}",
            f"{r.save_pct:.2f}"))
    return "\n".join(lines)


def _resolve_scenario(arg: str) -> str:
    if os.path.exists(arg):
        return arg
    return bundled_path(arg)


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if getattr(args, "no_failure", False):
        scenario = replace(scenario, failure=None)
    if getattr(args, "wait_mode", None):
        scenario = replace(scenario, wait_mode=WaitMode(args.wait_mode))
    mu1 = getattr(args, "mu1", None)
    mu2 = getattr(args, "mu2", None)
    if mu1 is not None or mu2 is not None:
        th = scenario.thresholds
        scenario = replace(scenario, thresholds=SleepThresholds(
            mu1=mu1 if mu1 is not None else th.mu1,
            mu2=mu2 if mu2 is not None else th.mu2))
    move = getattr(args, "move_ahead", None)
    if move is not None:
        policy = None if move.lower() in ("off", "none") else float(move)
        scenario = replace(scenario, move_ahead_policy=policy)
    return scenario


def _out_dir(args) -> str:
    out = args.out or os.environ.get("CKPTSIM_OUT") or "out"
    os.makedirs(out, exist_ok=True)
    return out


def _write_outputs(out: str, result: SimResult, rows: list[SavingsRow]) -> None:
    with open(os.path.join(out, "savings.csv"), "wb") as fh:
        text = "\n".join([SAVINGS_HEADER] + [r.to_csv() for r in rows]) + "\n"
        fh.write(text.encode("utf-8"))
    for label, run_result in (("baseline", result.baseline),
                              ("intervened", result.intervened)):
        with open(os.path.join(out, f"trace_{label}.csv"), "wb") as fh:
            emit_csv(run_result, fh)
        with open(os.path.join(out, f"trace_{label}.prv"), "wb") as fh:
            emit_prv(run_result, fh)
        with open(os.path.join(out, f"trace_{label}.pcf"), "wb") as fh:
            emit_pcf(fh)


def cmd_run(args) -> int:
    scenario = _apply_overrides(load_scenario(_resolve_scenario(args.scenario)), args)
    result = engine.run(scenario)
    rows = build_rows(result)
    out = _out_dir(args)
    _write_outputs(out, result, rows)
    if scenario.failure is None:
        print(f"{scenario.name}: no failure injected; all savings are zero")
    elif result.baseline.no_failure_effect:
        print(f"{scenario.name}: failure time lies beyond the application end; "
              f"baseline only")
    else:
        print(f"{scenario.name}: failure of node {scenario.failure.failed_node} "
              f"at t={scenario.failure.failure_time:g} s")
    print(format_table(rows))
    print(f"outputs written to {out}/")
    return 0


def _parse_times(text: str) -> list[float]:
    times = [float(t) for t in text.replace(",", " ").split()]
    if not times:
        raise ScenarioError("sweep needs at least one failure time")
    return times


def cmd_sweep(args) -> int:
    scenario = _apply_overrides(load_scenario(_resolve_scenario(args.scenario)), args)
    if scenario.failure is None:
        raise ScenarioError("sweep needs a [failure] section to vary")
    times = _parse_times(args.times)
    variants = [replace(scenario, failure=FailureSpec(scenario.failure.failed_node, t))
                for t in times]
    if args.parallel:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(engine.run, variants))
    else:
        results = [engine.run(v) for v in variants]
    out = _out_dir(args)
    lines = ["failure_time,node,save_j,save_pct"]
    for t, result in zip(times, results):
        rows = build_rows(result)
        print(f"\n{scenario.name} @ failure t={t:g} s")
        print(format_table(rows))
        lines.extend(f"{t:.6f},{r.node},{r.save_j:.2f},{r.save_pct:.2f}" for r in rows)
    with open(os.path.join(out, "sweep.csv"), "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
    print(f"\nsweep results written to {out}/sweep.csv")
    return 0


def _find_savings(out: str) -> list[str]:
    found = []
    direct = os.path.join(out, "savings.csv")
    if os.path.exists(direct):
        found.append(direct)
    for entry in sorted(os.listdir(out)):
        sub = os.path.join(out, entry, "savings.csv")
        if os.path.isdir(os.path.join(out, entry)) and os.path.exists(sub):
            found.append(sub)
    return found


def cmd_report(args) -> int:
    paths = _find_savings(args.out_dir)
    if not paths:
        print(f"no savings.csv under {args.out_dir}", file=sys.stderr)
        return 1
    rows = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().strip().splitlines()
        if not lines or lines[0] != SAVINGS_HEADER:
            print(f"{path}: not a savings.csv", file=sys.stderr)
            return 1
        for line in lines[1:]:
            f = line.split(",")
            rows.append(SavingsRow(f[0], int(f[1]), f[2], float(f[3]), f[4],
                                   float(f[5]), float(f[6]), float(f[7]),
                                   float(f[8]), float(f[9]), float(f[10]),
                                   float(f[11])))
    current = None
    for r in rows:
        if r.scenario != current:
            current = r.scenario
            print(f"\n=== {current} ===")
            print(format_table([]).splitlines()[0])
        print(format_table([r]).splitlines()[1])
    return 0


def _add_common(p):
    p.add_argument("--out", help="output directory (default: $CKPTSIM_OUT or ./out)")
    p.add_argument("--wait-mode", choices=["active", "idle"],
                   help="override the scenario wait mode")
    p.add_argument("--mu1", type=float, help="override the sleep time threshold")
    p.add_argument("--mu2", type=float, help="override the sleep energy threshold")
    p.add_argument("--move-ahead",
                   help="checkpoint moving-ahead fraction, or 'off'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ckptsim",
        description="Energy-strategy simulator for node failures under "
                    "uncoordinated checkpointing")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("scenario", help="scenario file or bundled name")
    p_run.add_argument("--no-failure", action="store_true",
                       help="drop the failure spec (baseline only)")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run one scenario across failure times")
    p_sweep.add_argument("scenario", help="scenario file or bundled name")
    p_sweep.add_argument("--times", required=True,
                         help="comma-separated failure times in seconds")
    p_sweep.add_argument("--parallel", action="store_true",
                         help="run sweep points concurrently")
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", help="render savings tables from an out dir")
    p_rep.add_argument("out_dir")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ScriptError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
