"""Randomised obstacle courses: success rate and the failing seeds.

    python demos/obstacle_batch.py [n_seeds] [workers]
"""
import sys

from gaitguide.harness import run_batch
from gaitguide.harness.suites import obstacle_suite

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
workers = int(sys.argv[2]) if len(sys.argv) > 2 else 1
rep = run_batch(obstacle_suite(range(n)), workers=workers)
g = rep.groups[0]
print(f"{g.runs} courses: {100 * g.success_rate:.0f}% arrived without contact, "
      f"mean time {g.stats['completion_time'].mean:.1f} s")
for r in rep.records:
    m = r.metrics
    if m is None or not m.arrived or m.collision_count:
        print(f"  seed {r.seed}: " + (r.error if m is None else f"arrived={m.arrived} contact ticks={m.collision_count}"))
