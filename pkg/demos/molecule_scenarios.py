"""Run every bundled molecular scenario and print its summary (a few minutes)."""

import sys
import time

from chiralwave.scenarios import bundled_scenarios, run_scenario

names = sys.argv[1:] or bundled_scenarios()
for name in names:
    t = time.perf_counter()
    res = run_scenario(name)
    print(f"== {name} ({time.perf_counter() - t:.1f} s)")
    print(res.summary())
