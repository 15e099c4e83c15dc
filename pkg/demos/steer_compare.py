"""Steer-to-angle with the device versus audio reminders, per target angle.

    python demos/steer_compare.py [seeds]
"""
import math
import sys

from gaitguide.harness import Walker, run_batch
from gaitguide.harness.suites import STEER_TARGETS_DEG, steer_suite

n = int(sys.argv[1]) if len(sys.argv) > 1 else 5
rms = {}
for w in (Walker.GUIDED, Walker.AUDIO_ONLY):
    cfgs, labels = steer_suite(w, seeds=range(n))
    rep = run_batch(cfgs, labels=labels)
    by = {}
    for r in rep.records:
        by.setdefault(r.label, []).append(r.metrics.final_heading_error)
    rms[w] = {k: math.sqrt(sum(e * e for e in v) / len(v)) for k, v in by.items()}

print(f"{'target':>8}{'guided':>10}{'audio':>10}   (final-angle RMSE, deg)")
for deg in STEER_TARGETS_DEG:
    k = f"{deg:+d}"
    print(f"{k:>8}{rms[Walker.GUIDED][k]:>10.2f}{rms[Walker.AUDIO_ONLY][k]:>10.2f}")
# random streams are keyed on the seed alone, so every target replays the
# same execution-noise draws; the audio column is flat for that reason
