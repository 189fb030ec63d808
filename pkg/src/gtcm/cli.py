"""Command-line entry point: run, verify, sweep and bench.

Exit codes: 0 ok, 2 config error, 3 blow-up detected, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import diagnostics as dg
from . import inequalities as iq
from . import io
from . import verify
from .model import initial_condition
from .spectral import Grid
from .timestepper import BlowUpError, integrate

log = logging.getLogger("gtcm")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4

SWEEP_COLUMNS = (
    "alpha", "beta", "status", "verdict", "regime", "regime_applies",
    "max_grad_u", "final_energy", "final_time", "blowup_time", "message",
)


# ---------------------------------------------------------------------------
# run

@dataclass
class RunOutcome:
    status: str  # "ok" | "blowup"
    out_dir: Path
    records: list
    verdict: dg.BoundVerdict
    blowup_time: Optional[float] = None
    message: str = ""


def _regime(params) -> str:
    return "smooth" if params.in_smooth_regime else "global"


def _resolve_ic_path(cfg: io.RunConfig, base_dir: Optional[Path]) -> io.RunConfig:
    p = cfg.ic.path
    if p and base_dir is not None and not Path(p).is_absolute() and not Path(p).exists():
        candidate = base_dir / p
        if candidate.exists():
            return replace(cfg, ic=replace(cfg.ic, path=str(candidate)))
    return cfg


def execute_run(cfg: io.RunConfig, emit_plot_data: bool = False) -> RunOutcome:
    """Integrate one configured run and write its artifacts into cfg.out_dir.

    Writes manifest.txt (the resolved config), diagnostics.csv, optional
    checkpoints and plot data, and summary.txt with the boundedness verdict.
    A blow-up is not an exception here: the truncated CSV is still written and
    the outcome carries status "blowup".
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(io.format_run_config(cfg))
    ic = cfg.ic
    state0 = initial_condition(ic.kind, cfg.grid, ic.amplitude, ic.seed, ic.path, ic.max_mode)
    recorder = dg.Recorder(cfg.params, lambda_s=cfg.lambda_s, cancellations=cfg.cancellations)
    step_cbs = []
    if cfg.checkpoint_every > 0:
        def checkpoint(s, n):
            if n % cfg.checkpoint_every == 0:
                io.save_checkpoint(out / f"checkpoint_{n:08d}.tcm", s, cfg.params)
        step_cbs.append(checkpoint)

    status, blowup_time, message = "ok", None, ""
    try:
        final, records = integrate(state0, cfg.params, cfg.stepper, diagnostics=recorder,
                                   step_callbacks=step_cbs)
        if cfg.checkpoint_every > 0:
            io.save_checkpoint(out / "final.tcm", final, cfg.params)
    except BlowUpError as err:
        status, blowup_time, message = "blowup", err.time, err.reason
        records = err.records
    io.write_diagnostics_csv(out / "diagnostics.csv", records)
    if emit_plot_data:
        io.write_plot_data(out / "plot", records, dg.CSV_COLUMNS)
    verdict = dg.bound_monitor(records, cfg.params, _regime(cfg.params), blowup_time=blowup_time)
    (out / "summary.txt").write_text(_summary_text(cfg, status, records, verdict, message))
    return RunOutcome(status, out, records, verdict, blowup_time, message)


def _summary_text(cfg, status, records, verdict: dg.BoundVerdict, message: str) -> str:
    lines = [
        f"status           : {status}" + (f" ({message})" if message else ""),
        f"verdict          : {verdict.label}",
        f"regime applies   : {verdict.regime_applies} (alpha={cfg.params.alpha!r}, beta={cfg.params.beta!r})",
        f"energy monotone  : {verdict.energy_nonincreasing}",
        f"records          : {len(records)}",
    ]
    if verdict.blowup_time is not None:
        lines.append(f"blow-up time     : {verdict.blowup_time!r}")
    if records:
        lines.append(f"final time       : {records[-1].time!r}")
        lines.append(f"final energy     : {records[-1].E!r}")
        lines.append(f"max energy resid.: {max(r.energy_residual for r in records)!r}")
    for q in verdict.quantities.values():
        flag = "ok" if q.bounded else f"exceeded at t={q.first_exceedance_time!r}"
        lines.append(f"  {q.name:<16} initial {q.initial:.6e}  max {q.maximum:.6e}  {flag}")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    try:
        cfg = io.load_run_config(args.config)
    except io.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out_dir:
        cfg = replace(cfg, out_dir=args.out_dir)
    cfg = _resolve_ic_path(cfg, Path(args.config).parent)
    try:
        outcome = execute_run(cfg, emit_plot_data=args.emit_plot_data)
    except (ValueError, OSError) as err:
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{outcome.status}: {len(outcome.records)} records written to {outcome.out_dir / 'diagnostics.csv'}")
    print(f"verdict: {outcome.verdict.label}")
    if outcome.status == "blowup":
        print(f"blow-up detected at t={outcome.blowup_time!r}: {outcome.message}", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _cell_config(spec: io.SweepSpec, alpha: float, beta: float) -> io.RunConfig:
    t = spec.template
    params = replace(t.params, alpha=alpha, beta=beta)
    out = Path(t.out_dir) / f"alpha_{alpha!r}_beta_{beta!r}"
    return replace(t, params=params, out_dir=str(out))


def run_sweep_cell(cfg: io.RunConfig) -> dict:
    """One sweep cell; every failure becomes a row instead of an exception."""
    row = {c: "" for c in SWEEP_COLUMNS}
    row.update(alpha=cfg.params.alpha, beta=cfg.params.beta, regime=_regime(cfg.params),
               regime_applies=cfg.params.in_global_regime)
    try:
        outcome = execute_run(cfg)
    except Exception as err:  # recorded, the sweep continues
        row.update(status="error", verdict="error", message=f"{type(err).__name__}: {err}")
        return row
    recs = outcome.records
    row.update(
        status=outcome.status,
        verdict=outcome.verdict.verdict,
        regime_applies=outcome.verdict.regime_applies,
        max_grad_u=max((math.sqrt(r.grad_u) for r in recs), default=math.nan),
        final_energy=recs[-1].E if recs else math.nan,
        final_time=recs[-1].time if recs else math.nan,
        blowup_time="" if outcome.blowup_time is None else outcome.blowup_time,
        message=outcome.message,
    )
    return row


def _cell_text(v) -> str:
    if isinstance(v, float):
        return io.format_float(v)
    return str(v)


def run_sweep(spec: io.SweepSpec) -> list[dict]:
    cells = [_cell_config(spec, a, b) for a, b in spec.cells()]
    if spec.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(run_sweep_cell, cells))
    else:
        rows = [run_sweep_cell(c) for c in cells]
    # order-independent reduction: rows sorted by (alpha, beta)
    return sorted(rows, key=lambda r: (r["alpha"], r["beta"]))


def write_sweep_summary(path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_cell_text(r[c]) for c in SWEEP_COLUMNS])


def cmd_sweep(args) -> int:
    try:
        spec = io.load_sweep_spec(args.spec)
    except io.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"cannot read sweep spec: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out_dir:
        spec = replace(spec, template=replace(spec.template, out_dir=args.out_dir))
    if args.workers:
        spec = replace(spec, workers=args.workers)
    spec = replace(spec, template=_resolve_ic_path(spec.template, Path(args.spec).parent))
    rows = run_sweep(spec)
    out = Path(spec.template.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_summary(out / "sweep_summary.csv", rows)
    for r in rows:
        print(f"alpha={r['alpha']!r:<8} beta={r['beta']!r:<8} {r['status']:<7} {r['verdict']}")
    print(f"summary written to {out / 'sweep_summary.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

def write_bench_report(out: Path, report: iq.BenchReport, cfg: iq.EnsembleConfig) -> tuple[Path, Path]:
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"bench_{report.bench_id}.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sample", "base_seed", "ratio", "degenerate"))
        for i, r in enumerate(report.ratios):
            bad = math.isnan(r)
            w.writerow((i, cfg.base_seed, "" if bad else io.format_float(r), int(bad)))
    summary_path = out / f"bench_{report.bench_id}_summary.txt"
    summary_path.write_text(report.summary() + "\n")
    return csv_path, summary_path


def cmd_bench(args) -> int:
    try:
        grid = Grid.cube(args.n, args.length)
        cfg = iq.EnsembleConfig(grid=grid, size=args.size, max_mode=args.max_mode,
                                base_seed=args.seed, alpha=args.alpha, workers=args.workers)
        report = iq.run_bench(args.bench_id, cfg)
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    csv_path, summary_path = write_bench_report(Path(args.out_dir), report, cfg)
    print(report.summary())
    print(f"ratios written to {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def _parse_override(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value {value!r}") from None


def cmd_verify(args) -> int:
    overrides = dict(args.tolerance or [])
    unknown = sorted(set(overrides) - set(verify.TOLERANCES))
    if unknown:
        print(f"config error: unknown tolerance name(s) {unknown}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    print(f"verify level={args.level}")
    results = verify.run_suite(args.level, overrides, tuple(args.group) if args.group else None,
                               progress=lambda r: print(r.line(), flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in {time.perf_counter() - t0:.1f} s")
    if failed:
        for r in failed:
            print(f"failed invariant: {r.group}/{r.name}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtcm",
        description="Pseudo-spectral simulator and diagnostics for the 3D generalized tropical climate model.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configured run")
    p.add_argument("config", help="key = value run configuration file")
    p.add_argument("--out-dir", help="override out.dir")
    p.add_argument("--emit-plot-data", action="store_true",
                   help="write one (time, value) file per diagnostic under <out>/plot")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("level", nargs="?", default="fast", choices=tuple(verify.LEVELS))
    p.add_argument("--group", action="append", choices=verify.GROUPS,
                   help="restrict to a check group (repeatable)")
    p.add_argument("--tolerance", action="append", type=_parse_override, metavar="NAME=VALUE",
                   help="override a named tolerance (repeatable)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run an (alpha, beta) parameter sweep")
    p.add_argument("spec", help="sweep specification file")
    p.add_argument("--out-dir", help="override the template out.dir")
    p.add_argument("--workers", type=int, help="override sweep.workers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="empirical inequality constants over a random ensemble")
    p.add_argument("bench_id", choices=iq.BENCH_IDS)
    p.add_argument("--n", type=int, default=32, help="grid points per axis")
    p.add_argument("--length", type=float, default=2 * math.pi, help="box length per axis")
    p.add_argument("--size", type=int, default=1000, help="ensemble size")
    p.add_argument("--max-mode", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--alpha", type=float, default=1.5, help="order for the interpolation bench")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default="bench_out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
