"""Many scenario runs at once, with an order-independent summary.

Runs are independent processes of work: each one builds its own simulator
from its config, so they can be spread over a process pool.  A run that
raises is recorded with its error message instead of aborting the batch.
Aggregates sort their inputs before summing, so the summary does not
depend on completion order or worker count.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .artifacts import emit_artifacts
from .runner import run_scenario
from .scenario import Kind, ScenarioConfig
from .trace import FIELDS, RunMetrics, write_text_atomic

NUMERIC = tuple(f for f in FIELDS if f != "arrived")


@dataclass(frozen=True)
class RunRecord:
    name: str
    kind: str
    walker: str
    seed: int
    metrics: RunMetrics | None
    error: str | None = None
    label: str = ""

    @property
    def ok(self) -> bool:
        return self.metrics is not None

    @property
    def success(self) -> bool:
        """Arrived without a single collision tick."""
        return self.ok and self.metrics.arrived and self.metrics.collision_count == 0


@dataclass(frozen=True)
class Stat:
    n: int
    mean: float
    std: float  # population
    rms: float


def stat(values) -> Stat:
    """Mean, population std and root-mean-square, summed in sorted order."""
    v = sorted(float(x) for x in values)
    n = len(v)
    if n == 0:
        return Stat(0, math.nan, math.nan, math.nan)
    mean = math.fsum(v) / n
    var = math.fsum(sorted((x - mean) ** 2 for x in v)) / n
    rms = math.sqrt(math.fsum(sorted(x * x for x in v)) / n)
    return Stat(n, mean, math.sqrt(var), rms)


@dataclass(frozen=True)
class GroupSummary:
    name: str
    walker: str
    runs: int
    failed: int
    success_rate: float
    arrived_rate: float
    stats: dict  # field -> Stat


@dataclass(frozen=True)
class BatchReport:
    records: tuple[RunRecord, ...]
    groups: tuple[GroupSummary, ...]

    def group(self, name: str | None = None, walker: str | None = None) -> GroupSummary:
        for g in self.groups:
            if (name is None or g.name == name) and (walker is None or g.walker == walker):
                return g
        raise KeyError((name, walker))

    @property
    def failures(self) -> tuple[RunRecord, ...]:
        return tuple(r for r in self.records if not r.ok)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["name", "walker", "runs", "failed", "success_rate", "arrived_rate"]
        for f in NUMERIC:
            head += [f"{f}_mean", f"{f}_std", f"{f}_rms"]
        w.writerow(head)
        for g in self.groups:
            row = [g.name, g.walker, g.runs, g.failed, _num(g.success_rate), _num(g.arrived_rate)]
            for f in NUMERIC:
                s = g.stats[f]
                row += [_num(s.mean), _num(s.std), _num(s.rms)]
            w.writerow(row)
        return buf.getvalue()

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "label", "walker", "seed", *FIELDS, "error"])
        for r in self.records:
            vals = [""] * len(FIELDS) if r.metrics is None else [_num(getattr(r.metrics, f)) for f in FIELDS]
            w.writerow([r.name, r.label, r.walker, r.seed, *vals, r.error or ""])
        return buf.getvalue()


def _num(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, int):
        return str(v)
    return "%.6f" % v


def summarize(records) -> BatchReport:
    recs = tuple(sorted(records, key=lambda r: (r.name, r.walker, r.label, r.seed)))
    groups = []
    for key in sorted({(r.name, r.walker) for r in recs}):
        rs = [r for r in recs if (r.name, r.walker) == key]
        good = [r.metrics for r in rs if r.ok]
        stats = {f: stat(float(getattr(m, f)) for m in good) for f in NUMERIC}
        groups.append(
            GroupSummary(
                name=key[0],
                walker=key[1],
                runs=len(rs),
                failed=len(rs) - len(good),
                success_rate=sum(r.success for r in rs) / len(rs),
                arrived_rate=sum(1 for m in good if m.arrived) / len(rs),
                stats=stats,
            )
        )
    return BatchReport(recs, tuple(groups))


def _job(args) -> RunRecord:
    cfg, label, out_dir = args
    base = dict(name=cfg.name, kind=cfg.kind.value, walker=cfg.walker.value, seed=cfg.seed, label=label)
    try:
        metrics, trace = run_scenario(cfg)
        if out_dir is not None:
            emit_artifacts(trace, Path(out_dir) / run_dirname(cfg, label))
        return RunRecord(metrics=metrics, **base)
    except Exception as exc:  # recorded, the batch goes on
        return RunRecord(metrics=None, error=f"{type(exc).__name__}: {exc}", **base)


def run_dirname(cfg: ScenarioConfig, label: str = "") -> str:
    tag = f"_{label}" if label else ""
    return f"{cfg.name}{tag}_{cfg.walker.value}_seed{cfg.seed}"


def expand(cfgs, seeds=None) -> list[ScenarioConfig]:
    """A config or list of configs, optionally crossed with a seed range."""
    if isinstance(cfgs, ScenarioConfig):
        cfgs = [cfgs]
    cfgs = list(cfgs)
    if seeds is None:
        return cfgs
    return [c.with_seed(s) for c in cfgs for s in seeds]


def run_batch(cfgs, seeds=None, workers: int = 1, out_dir=None, labels=None) -> BatchReport:
    """Run every config (crossed with ``seeds`` if given) and summarise.

    ``labels`` optionally tags each config (before seed expansion), e.g.
    with the target angle of a steering suite.  With ``out_dir`` each run
    writes its artifacts to its own subdirectory.
    """
    base = [cfgs] if isinstance(cfgs, ScenarioConfig) else list(cfgs)
    labels = list(labels) if labels is not None else [""] * len(base)
    if len(labels) != len(base):
        raise ValueError("one label per config")
    jobs = []
    for c, lab in zip(base, labels):
        for cc in expand(c, seeds):
            jobs.append((cc, lab, None if out_dir is None else str(out_dir)))
    if workers <= 1 or len(jobs) <= 1:
        records = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    report = summarize(records)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_text_atomic(out / "summary.csv", report.to_csv())
        write_text_atomic(out / "runs.csv", report.runs_csv())
    return report


# ----------------------------------------------------------------------
# pass rules used by ``batch`` on the command line


def acceptance(report: BatchReport) -> tuple[bool, list[str]]:
    """Scenario-kind pass rule for each group; returns (ok, messages)."""
    ok = True
    msgs = []
    kinds = {(r.name, r.walker): r.kind for r in report.records}
    for g in report.groups:
        kind = Kind(kinds[(g.name, g.walker)])
        s = g.stats
        if g.failed:
            good, why = False, f"{g.failed} run(s) raised"
        elif kind is Kind.TURN90:
            worst = _max_of(report, g, "completion_time")
            good = g.arrived_rate == 1.0 and worst <= 2.5
            why = f"{100 * g.arrived_rate:.0f}% reached the turn, slowest {worst:.2f} s (rule: all within 2.5 s)"
        elif kind is Kind.STEER_TO_ANGLE:
            good = s["final_heading_error"].rms <= 2.5
            why = f"final-angle RMSE {s['final_heading_error'].rms:.2f} deg <= 2.5"
        elif kind is Kind.OBSTACLE_COURSE:
            good = g.success_rate >= 0.95
            why = f"collision-free arrivals {100 * g.success_rate:.0f}% >= 95%"
        else:
            good = g.arrived_rate == 1.0
            why = f"arrived {100 * g.arrived_rate:.0f}% of runs"
        ok &= bool(good)
        msgs.append(f"{'PASS' if good else 'FAIL'} {g.name} {g.walker}: {why}")
    return ok, msgs


def _max_of(report: BatchReport, g: GroupSummary, field: str) -> float:
    vals = [getattr(r.metrics, field) for r in report.records if r.ok and (r.name, r.walker) == (g.name, g.walker)]
    return max(vals) if vals else math.nan


__all__ = [
    "BatchReport",
    "GroupSummary",
    "RunRecord",
    "Stat",
    "acceptance",
    "expand",
    "run_batch",
    "run_dirname",
    "stat",
    "summarize",
]
