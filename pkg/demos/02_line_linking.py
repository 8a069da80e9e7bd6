"""Walk the line-linking pipeline stage by stage on a synthetic staircase.

The method works on at most 50 grid cells: threshold the decoded cells at
0.75, keep the top 50 by confidence, group adjacent cells, drop single-cell
groups, least-squares fit y = kx + b per group, then merge groups whose
lines meet inside the image or whose endpoints are close, refitting merged
groups once.
"""

from stairkit import GridGeometry, LinkerConfig, StairSpec, encode_lines, scene_lines
from stairkit.label_codec import decode_cells
from stairkit.line_linker import (
    drop_singletons,
    fit_group,
    group_adjacent,
    link_lines,
    merge_groups,
    select_cells,
)
from dataclasses import replace

spec = StairSpec(steps=4, pitch=0.12, yaw=0.05, roll=0.02, position=(0.1, -0.8, -2.2))
lines = scene_lines(spec)
geom = GridGeometry()
cfg = LinkerConfig()

convex, concave = encode_lines(lines, geom)

print(f"scene: {spec.steps} steps -> {len(lines)} ground-truth lines")
for pair in (convex, concave):
    print(f"\n--- {pair.kind} pipeline ---")
    dets = decode_cells(pair, cfg.confidence_threshold)
    print(f"cells >= {cfg.confidence_threshold}: {len(dets)}")
    selected = select_cells(dets, cfg)
    print(f"after top-{cfg.top_k}: {len(selected)}")
    groups = group_adjacent(selected)
    survivors = drop_singletons(groups)
    print(f"groups: {len(groups)}, after dropping singletons: {len(survivors)}")
    fitted = [replace(g, fitted=fit_group(g, geom)) for g in survivors]
    merged = merge_groups(fitted, cfg, geom)
    print(f"after merging: {len(merged)} line equations")
    for eq in merged:
        print(f"  y = {eq.k:+.4f} x + {eq.b:8.3f}   x in [{eq.x_min:6.1f}, {eq.x_max:6.1f}]"
              f"   from {eq.source_cells} cells")

print("\n--- one-call pipeline vs ground truth ---")
for eq in link_lines(convex, concave, cfg, geom):
    truth = min(
        (l for l in lines if l.kind == eq.kind),
        key=lambda l: abs(l.y1 - (eq.k * l.x1 + eq.b)),
    )
    kt = (truth.y2 - truth.y1) / (truth.x2 - truth.x1)
    bt = truth.y1 - kt * truth.x1
    print(f"{eq.kind:8s} fitted (k={eq.k:+.4f}, b={eq.b:7.2f})"
          f"   truth (k={kt:+.4f}, b={bt:7.2f})")
