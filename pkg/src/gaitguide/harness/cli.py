"""Command line: ``python -m gaitguide {run,batch,replay,report}``.

Exit codes: 0 success, 1 error, 2 a batch that ran but missed its pass rule.
Output goes under ``--out``, or ``$GAITGUIDE_OUT``, or ``./gaitguide-out``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from ..errors import GaitGuideError
from .artifacts import emit_artifacts
from .batch import RunRecord, acceptance, run_batch, run_dirname, summarize
from .runner import run_scenario
from .scenario import Walker, builtin_names, resolve
from .trace import FIELDS, compute_metrics, read_trace, write_text_atomic

log = logging.getLogger("gaitguide")

OUT_ENV = "GAITGUIDE_OUT"


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "gaitguide-out"))


def parse_seeds(text: str) -> range:
    """``"A..B"`` (inclusive) or a single integer."""
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
    else:
        lo = hi = int(text)
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return range(lo, hi + 1)


def _load(args):
    cfg = resolve(args.scenario, args.override)
    if getattr(args, "walker", None):
        cfg = cfg.with_walker(Walker(args.walker))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _print_metrics(m, out=None) -> None:
    out = out or sys.stdout
    for f in FIELDS:
        v = getattr(m, f)
        out.write(f"{f:>20}: {v:.4f}\n" if isinstance(v, float) else f"{f:>20}: {v}\n")


def cmd_run(args) -> int:
    cfg = _load(args)
    metrics, trace = run_scenario(cfg, strict=args.strict)
    out = Path(args.out or default_out()) / run_dirname(cfg)
    files = emit_artifacts(trace, out)
    print(f"{cfg.name} ({cfg.kind.value}, {cfg.walker.value}, seed {cfg.seed}): {trace.meta['end_reason']}")
    _print_metrics(metrics)
    print(f"wrote {len(files)} files to {out}")
    return 0


BASELINE_NOTE = (
    "note: AudioOnly and CaneContact are stand-in baselines; their cue period, "
    "execution noise and cane speeds are the [baseline] scenario parameters, not measured human behaviour"
)


def _table(report) -> str:
    lines = [f"{'name':<18}{'walker':<13}{'runs':>5}{'fail':>5}{'success':>9}{'time':>9}{'heading':>9}{'lateral':>9}"]
    for g in report.groups:
        s = g.stats
        lines.append(
            f"{g.name:<18}{g.walker:<13}{g.runs:>5}{g.failed:>5}{100 * g.success_rate:>8.0f}%"
            f"{s['completion_time'].mean:>9.2f}{s['final_heading_error'].rms:>9.2f}{s['lateral_rmse'].mean:>9.3f}"
        )
    if any(g.walker != Walker.GUIDED.value for g in report.groups):
        lines.append(BASELINE_NOTE)
    return "\n".join(lines)


def cmd_batch(args) -> int:
    cfg = _load(args)
    out = Path(args.out or default_out()) / f"batch_{cfg.name}"
    report = run_batch(cfg, seeds=args.seeds, workers=args.workers, out_dir=out if not args.no_artifacts else None)
    if args.no_artifacts:
        out.mkdir(parents=True, exist_ok=True)
        write_text_atomic(out / "summary.csv", report.to_csv())
        write_text_atomic(out / "runs.csv", report.runs_csv())
    print(_table(report))
    for r in report.failures:
        print(f"run failed: seed {r.seed}: {r.error}")
    ok, msgs = acceptance(report)
    print("\n".join(msgs))
    print(f"summary written to {out / 'summary.csv'}")
    return 0 if ok else 2


def cmd_replay(args) -> int:
    trace = read_trace(args.trace)
    m = compute_metrics(trace)
    meta = trace.meta
    print(f"{meta.get('name')} ({meta.get('kind')}, {meta.get('walker')}, seed {meta.get('seed')}): {meta.get('end_reason')}")
    _print_metrics(m)
    if args.out:
        files = emit_artifacts(trace, args.out)
        print(f"wrote {len(files)} files to {args.out}")
    return 0


def cmd_report(args) -> int:
    root = Path(args.dir)
    paths = sorted(root.rglob("trace.csv"))
    if not paths:
        raise GaitGuideError(f"no trace.csv files under {root}")
    records = []
    for p in paths:
        tr = read_trace(p)
        m = tr.meta
        records.append(
            RunRecord(m.get("name", p.parent.name), m.get("kind", ""), m.get("walker", ""), int(m.get("seed", 0)), compute_metrics(tr))
        )
    report = summarize(records)
    print(_table(report))
    names = sorted({r.name for r in records})
    for n in names:
        g = [r for r in records if r.name == n and r.walker == Walker.GUIDED.value]
        c = [r for r in records if r.name == n and r.walker == Walker.CANE_CONTACT.value]
        if g and c:
            tg = sum(r.metrics.completion_time for r in g) / len(g)
            tc = sum(r.metrics.completion_time for r in c) / len(c)
            print(f"{n}: guided {tg:.1f} s vs cane {tc:.1f} s, time saved {100 * (1 - tg / tc):.1f}%")
    write_text_atomic(root / "summary.csv", report.to_csv())
    print(f"summary written to {root / 'summary.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaitguide", description="Simulate gait-guided walking scenarios.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="verb", required=True)

    def scenario_args(sp):
        sp.add_argument("scenario", help=f"scenario file or built-in name ({', '.join(builtin_names())})")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario key, e.g. task.target_deg=60 (repeatable)")
        sp.add_argument("--walker", choices=[w.value for w in Walker])
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./gaitguide-out)")

    r = sub.add_parser("run", help="run one scenario and write its artifacts")
    scenario_args(r)
    r.add_argument("--seed", type=int)
    r.add_argument("--strict", action="store_true", help="treat hitting the duration cap as an error")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="run a scenario over a seed range and summarise")
    scenario_args(b)
    b.add_argument("--seeds", type=parse_seeds, required=True, metavar="A..B")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--no-artifacts", action="store_true", help="only write the summary tables")
    b.set_defaults(func=cmd_batch)

    rp = sub.add_parser("replay", help="recompute metrics from a trace CSV")
    rp.add_argument("trace")
    rp.add_argument("--out", help="also re-render the artifacts here")
    rp.set_defaults(func=cmd_replay)

    rep = sub.add_parser("report", help="summarise every trace.csv under a directory")
    rep.add_argument("dir")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (GaitGuideError, OSError, ValueError, KeyError) as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
