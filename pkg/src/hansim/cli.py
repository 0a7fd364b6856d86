"""Command line interface: ``hansim run|compare|sweep``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .domain import HanError
from .engine import simulate
from .metrics import Summary, reduction, summarize
from .workload import (
    Mode,
    apply_parameter,
    load_scenario,
    parse_number_list,
    parse_duration,
)

log = logging.getLogger("hansim")

SHIPPED = Path(__file__).parent / "scenarios"


class UsageError(HanError):
    """Bad invocation or configuration (exit code 1)."""


@dataclass
class RunReport:
    scenario: str
    modes: tuple
    summaries: dict
    peak_reduction: Optional[float] = None
    std_reduction: Optional[float] = None
    paths: list = field(default_factory=list)

    def render(self) -> str:
        lines = [f"scenario: {self.scenario}"]
        for mode in self.modes:
            s = self.summaries[mode]
            delay = "n/a" if s.avg_delay_s is None else f"{s.avg_delay_s:.1f} s"
            lines.append(
                f"{mode.value:>11}: peak {s.peak_kw:.3f} kW  mean {s.mean_kw:.3f} kW  "
                f"std {s.std_kw:.3f} kW  avg delay {delay}"
            )
            for label, st in s.streams.items():
                lines.append(
                    f"{'':>13}{label}: peak {st.peak_kw:.3f}  mean {st.mean_kw:.3f}  "
                    f"std {st.std_kw:.3f}"
                )
        if len(self.modes) == 2:
            lines.append(f"peak reduction: {_pct(self.peak_reduction)}")
            lines.append(f"std reduction: {_pct(self.std_reduction)}")
        return "\n".join(lines) + "\n"


def _pct(value):
    return "n/a" if value is None else f"{100 * value:.1f}%"


def resolve_scenario(spec: str) -> Path:
    """A path, or the name of a shipped scenario (``dcube``, ``setting1`` ...)."""
    path = Path(spec)
    if path.is_file():
        return path
    for candidate in (SHIPPED / path.name, SHIPPED / f"{path.name}.han"):
        if candidate.is_file():
            return candidate
    raise UsageError(f"no such scenario file: {spec}")


def _load(spec, seed=None):
    scenario = load_scenario(resolve_scenario(spec))
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    return scenario


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def _write_mode(outdir: Path, result):
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for label, trace in list(result.traces.items()) + [("total", result.total)]:
        p = outdir / f"load_{label}.csv"
        _write_csv(p, ["time_s", "load_kw"],
                   ((i * trace.tick_s, f"{v:.4f}") for i, v in enumerate(trace.samples)))
        paths.append(p)
    p = outdir / "delays.csv"
    _write_csv(p, ["device", "request_time_s", "first_on_s", "delay_s"],
               ((r.device, r.request_time_s, "" if r.first_on_s is None else r.first_on_s,
                 "" if r.delay_s is None else r.delay_s) for r in result.delays))
    paths.append(p)
    return paths


def build_report(scenario, result, skip_s=0) -> RunReport:
    summaries = {}
    for mode, res in result.runs.items():
        summaries[mode] = summarize(res.total, res.traces, res.delays, skip_s)
    report = RunReport(scenario.name, tuple(result.runs), summaries)
    if Mode.COORDINATED in summaries and Mode.BASELINE in summaries:
        c, b = summaries[Mode.COORDINATED], summaries[Mode.BASELINE]
        report.peak_reduction = reduction(b.peak_kw, c.peak_kw)
        report.std_reduction = reduction(b.std_kw, c.std_kw)
    return report


def cmd_run(scenario_path, seed=None, out=None, mode=None, skip_s=0, literal=False,
            quiet=False) -> RunReport:
    scenario = _load(scenario_path, seed)
    result = simulate(scenario, mode, literal=literal)
    report = build_report(scenario, result, skip_s)
    outdir = Path(out) if out is not None else Path("hansim-out") / scenario.name
    try:
        for m, res in result.runs.items():
            report.paths += _write_mode(outdir / m.value, res)
        summary = outdir / "summary.txt"
        summary.write_text(report.render())
        report.paths.append(summary)
    except OSError as exc:
        raise EnvironmentError(f"cannot write outputs to {outdir}: {exc}") from exc
    if not quiet:
        sys.stdout.write(report.render())
    return report


def cmd_compare(scenario_path, seed=None, out=None, skip_s=0, literal=False,
                quiet=False) -> RunReport:
    return cmd_run(scenario_path, seed, out, Mode.BOTH, skip_s, literal, quiet)


def _fmt_value(v) -> str:
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _sweep_point(args):
    scenario, parameter, value, mode, skip_s, literal = args
    point = apply_parameter(scenario, parameter, value)
    result = simulate(point, mode, literal=literal)
    rows = []
    for m, res in result.runs.items():
        s: Summary = summarize(res.total, res.traces, res.delays, skip_s)
        delay = "" if s.avg_delay_s is None else f"{s.avg_delay_s:.4f}"
        rows.append([_fmt_value(value), m.value, f"{s.peak_kw:.4f}", f"{s.mean_kw:.4f}",
                     f"{s.std_kw:.4f}", delay])
    return rows


def cmd_sweep(scenario_path, parameter, values, fixed=(), seed=None, out=None, mode=None,
              skip_s=0, literal=False, jobs=1, quiet=False):
    """One simulation per value; writes ``sweep.csv`` and returns its rows."""
    scenario = _load(scenario_path, seed)
    for name, value in fixed:
        scenario = apply_parameter(scenario, name, value)
    mode = Mode(mode) if mode is not None else Mode.BOTH
    tasks = [(scenario, parameter, v, mode, skip_s, literal) for v in values]
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            chunks = list(pool.map(_sweep_point, tasks))
    else:
        chunks = [_sweep_point(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    outdir = Path(out) if out is not None else Path("hansim-out") / scenario.name
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        _write_csv(outdir / "sweep.csv",
                   ["value", "mode", "peak_kw", "mean_kw", "std_kw", "avg_delay_s"], rows)
    except OSError as exc:
        raise EnvironmentError(f"cannot write outputs to {outdir}: {exc}") from exc
    if not quiet:
        for row in rows:
            sys.stdout.write(",".join(row) + "\n")
    return rows


def _fixed(text):
    name, eq, value = text.partition("=")
    if not eq:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    return name, parse_number_list(value)[0]


def _skip(text):
    try:
        return parse_duration(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hansim",
        description="Simulate decentralized duty-cycle coordination in a home area network.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario file or shipped scenario name")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out", help="output directory (default hansim-out/<name>)")
        p.add_argument("--skip", type=_skip, default=0,
                       help="exclude this leading window from the metrics (e.g. 30min)")
        p.add_argument("--compat-literal-p3", dest="literal", action="store_true",
                       help="schedule every tick with the literal admission count")
        p.add_argument("-q", "--quiet", action="store_true")

    run = sub.add_parser("run", help="simulate a scenario and write CSV traces")
    common(run)
    run.add_argument("--mode", choices=[m.value for m in Mode])

    cmp_ = sub.add_parser("compare", help="coordinated vs baseline with reductions")
    common(cmp_)

    sweep = sub.add_parser("sweep", help="run one simulation per parameter value")
    common(sweep)
    sweep.add_argument("--mode", choices=[m.value for m in Mode])
    sweep.add_argument("--param", required=True,
                       choices=["min_dcd_s", "r", "delivery_p", "contenders"])
    sweep.add_argument("--values", required=True,
                       help="comma separated; fractions (1/6) and durations (5min) accepted")
    sweep.add_argument("--set", dest="fixed", type=_fixed, action="append", default=[],
                       metavar="NAME=VALUE", help="apply a fixed parameter before sweeping")
    sweep.add_argument("--jobs", type=int, default=0, help="worker processes (0 = all CPUs)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cmd_run(args.scenario, args.seed, args.out, args.mode, args.skip, args.literal,
                    args.quiet)
        elif args.command == "compare":
            cmd_compare(args.scenario, args.seed, args.out, args.skip, args.literal, args.quiet)
        else:
            try:
                values = parse_number_list(args.values)
            except ValueError as exc:
                raise UsageError(f"bad --values: {exc}") from None
            cmd_sweep(args.scenario, args.param, values, args.fixed, args.seed, args.out,
                      args.mode, args.skip, args.literal, args.jobs, args.quiet)
    except HanError as exc:
        print(f"hansim: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"hansim: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
