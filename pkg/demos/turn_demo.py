"""Guided 90 degree turn: print the heading every quarter second and write
the trajectory and rope plots.

    python demos/turn_demo.py [out_dir]
"""
import math
import sys

from gaitguide.harness import asymmetry_confined, builtin, emit_artifacts, run_scenario

out = sys.argv[1] if len(sys.argv) > 1 else "demo-out/turn90"
cfg = builtin("turn90")
metrics, trace = run_scenario(cfg)

t = trace.column("t")
h = trace.column("true_heading")
ml, mr = trace.column("mod_left"), trace.column("mod_right")
for i in range(0, len(t), 25):
    print(f"t={t[i]:5.2f} s  heading={math.degrees(h[i]):6.1f} deg  mod L/R={ml[i]:+.2f}/{mr[i]:+.2f}")

ok, inside, outside = asymmetry_confined(trace)
print(f"turned 90 deg in {metrics.completion_time:.2f} s over {metrics.steps} steps")
print(f"rope asymmetry: {inside:.2f} during the turn, {outside:.2f} elsewhere (confined: {ok})")
files = emit_artifacts(trace, out)
print("wrote", ", ".join(str(p) for p in files))
