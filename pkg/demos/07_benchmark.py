"""Time the post-CNN pipeline on synthetic 640x480 inputs.

Four stages: line linking of the label grids, mask hardening, per-class
depth gating, and point cloud rebuilding. Median and p95 are reported per
stage and for the whole pipeline, single-threaded and with a thread pool
over row bands for the rebuild.
"""

from stairkit.cli import BENCH_STAGES, bench_pipeline

for threads in (1, 8):
    report = bench_pipeline(size=(480, 640), iters=50, threads=threads, seed=0)
    print(f"\nthreads={threads}  size=640x480  iters={report['iters']}")
    print(f"{'stage':<18} {'median_ms':>10} {'p95_ms':>10}")
    for name in BENCH_STAGES:
        s = report["stages"][name]
        print(f"{name:<18} {s['median_ms']:>10.3f} {s['p95_ms']:>10.3f}")
    w = report["whole_process"]
    print(f"{'whole_process':<18} {w['median_ms']:>10.3f} {w['p95_ms']:>10.3f}")
    print(f"stable (p95 <= 2x median): {report['stable']}")
