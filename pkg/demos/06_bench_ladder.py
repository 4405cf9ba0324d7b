"""Time the three interchangeable loss engines on the same workload:
top-down memoized recursion, bottom-up tabulation, and the vectorized
tabulation. Losses must agree before anything is timed.

Run: python demos/06_bench_ladder.py
"""

import json

from stclib.bench import run_bench

report = run_bench(
    impls=["memo", "table", "vec"],
    batch=5,
    frames=160,
    profile="repetitive",
    iters=10,
    seed=0,
)

print("workload:", json.dumps(report["workload"]))
print(f"agreement: max |loss diff| = {report['agreement']['max_abs_diff']:.2e}\n")
print(f"{'engine':8s} {'sec/iter':>10s} {'speedup':>9s}")
for name, r in report["implementations"].items():
    print(f"{name:8s} {r['seconds_per_iteration']:10.4f} {r['speedup_vs_memoized']:8.1f}x")
print("\n(speedups are relative to the memoized engine; absolute times are hardware-bound)")
