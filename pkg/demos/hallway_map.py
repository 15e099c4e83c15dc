"""Walk the L-shaped hallway while mapping, then compare against the cane
walker and export the occupancy map.

    python demos/hallway_map.py [seed] [out_dir]
"""
import sys

import numpy as np

from gaitguide.harness import Walker, builtin, emit_artifacts, run_scenario
from gaitguide.world_sense import rasterize_segments

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
out = sys.argv[2] if len(sys.argv) > 2 else f"demo-out/hallway_seed{seed}"
cfg = builtin("hallway").with_seed(seed)

guided, trace = run_scenario(cfg)
cane, _ = run_scenario(cfg.with_walker(Walker.CANE_CONTACT))

walls = rasterize_segments(trace.grid, cfg.world.segments)
seen = (trace.grid.log_odds[walls] > 0).mean()
t = trace.column("t")
err = np.hypot(trace.column("est_x") - trace.column("true_x"), trace.column("est_y") - trace.column("true_y"))
# the pedometer needs a few steps before its stride interval is known
locked = t >= 2.0
print(f"guided: {guided.completion_time:.1f} s, cane: {cane.completion_time:.1f} s "
      f"({100 * (1 - guided.completion_time / cane.completion_time):.0f}% less time)")
print(f"wall cells marked occupied from estimated poses: {100 * seen:.0f}%")
print(f"position error after the first 2 s: median {np.median(err[locked]):.2f} m, max {err[locked].max():.2f} m")
files = emit_artifacts(trace, out)
print("wrote", ", ".join(str(p) for p in files))
