"""The standard experiment suites, as lists of scenario configs.

Each helper returns configs ready for :func:`~gaitguide.harness.batch.run_batch`;
the acceptance tests and demos use the same definitions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .batch import BatchReport, run_batch
from .scenario import ScenarioConfig, Walker, builtin

STEER_TARGETS_DEG = (30, -30, 60, -60, 90, -90, 120, -120, 180)
STEER_SEEDS = range(10)
STRAIGHT_SEEDS = range(20)
OBSTACLE_SEEDS = range(100)
DOMINANCE_SEEDS = range(5)
DOMINANCE_SCENARIOS = ("hallway", "hallway_exit", "outdoor_route")

# published calibration context for the dominance suites (human trials)
REFERENCE_HALLWAY_SPEEDUP = 0.23  # guided walking speed gain over the cane
REFERENCE_OUTDOOR_TIME_CUT = 0.32  # guided completion time saved over the cane


def steer_suite(walker: Walker = Walker.GUIDED, seeds=STEER_SEEDS, targets_deg=STEER_TARGETS_DEG):
    """(configs, labels): one config per target and seed."""
    cfgs, labels = [], []
    for deg in targets_deg:
        base = builtin("steer_to_angle", [f"task.target_deg={deg}"]).with_walker(walker)
        for s in seeds:
            cfgs.append(base.with_seed(s))
            labels.append(f"{deg:+d}")
    return cfgs, labels


def straight_suite(walker: Walker = Walker.GUIDED, seeds=STRAIGHT_SEEDS) -> list[ScenarioConfig]:
    base = builtin("straight_walk").with_walker(walker)
    return [base.with_seed(s) for s in seeds]


def obstacle_suite(seeds=OBSTACLE_SEEDS) -> list[ScenarioConfig]:
    base = builtin("obstacle_course")
    return [base.with_seed(s) for s in seeds]


def dominance_suite(name: str, seeds=DOMINANCE_SEEDS) -> list[ScenarioConfig]:
    """Guided and CaneContact runs of one route over the default seeds."""
    base = builtin(name)
    return [base.with_seed(s).with_walker(w) for w in (Walker.GUIDED, Walker.CANE_CONTACT) for s in seeds]


@dataclass(frozen=True)
class Comparison:
    """Per-seed completion times of the guided and cane walkers on one route."""

    name: str
    seeds: tuple[int, ...]
    guided: tuple[float, ...]
    cane: tuple[float, ...]
    guided_arrived: tuple[bool, ...]

    @property
    def dominates(self) -> bool:
        """Guided arrives and is strictly faster on every seed."""
        return all(a and g < c for g, c, a in zip(self.guided, self.cane, self.guided_arrived))

    @property
    def time_cut(self) -> float:
        """Mean fraction of completion time saved, 1 - T_guided / T_cane."""
        return math.fsum(sorted(1.0 - g / c for g, c in zip(self.guided, self.cane))) / len(self.seeds)

    @property
    def speedup(self) -> float:
        """Mean average-speed gain over the same route, T_cane / T_guided - 1."""
        return math.fsum(sorted(c / g - 1.0 for g, c in zip(self.guided, self.cane))) / len(self.seeds)


def compare(report: BatchReport, name: str) -> Comparison:
    by = {}
    for r in report.records:
        if r.name == name and r.ok:
            by[(r.walker, r.seed)] = r.metrics
    seeds = tuple(sorted({s for _, s in by}))
    g = [by[(Walker.GUIDED.value, s)] for s in seeds]
    c = [by[(Walker.CANE_CONTACT.value, s)] for s in seeds]
    return Comparison(
        name,
        seeds,
        tuple(m.completion_time for m in g),
        tuple(m.completion_time for m in c),
        tuple(m.arrived for m in g),
    )


def run_dominance(seeds=DOMINANCE_SEEDS, names=DOMINANCE_SCENARIOS, workers: int = 1) -> dict[str, Comparison]:
    cfgs = [c for n in names for c in dominance_suite(n, seeds)]
    report = run_batch(cfgs, workers=workers)
    if report.failures:
        raise RuntimeError(f"{len(report.failures)} dominance run(s) failed: {report.failures[0].error}")
    return {n: compare(report, n) for n in names}


__all__ = [
    "Comparison",
    "DOMINANCE_SCENARIOS",
    "DOMINANCE_SEEDS",
    "OBSTACLE_SEEDS",
    "REFERENCE_HALLWAY_SPEEDUP",
    "REFERENCE_OUTDOOR_TIME_CUT",
    "STEER_SEEDS",
    "STEER_TARGETS_DEG",
    "STRAIGHT_SEEDS",
    "compare",
    "dominance_suite",
    "obstacle_suite",
    "run_dominance",
    "steer_suite",
    "straight_suite",
]
