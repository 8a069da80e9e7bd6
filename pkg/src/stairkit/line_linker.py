"""Link per-cell line detections into whole-stair line equations.

Pipeline per line kind: threshold the decoded cells, keep the top-k by
confidence, group adjacent cells (8-connectivity), drop single-cell groups,
least-squares fit y = kx + b per group, then merge groups whose lines
intersect inside the image x-range or whose corresponding endpoints are
close. Merged groups are refitted once, so each surviving line costs at
most two least-squares rounds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

from .core import GridGeometry, LineEquation
from .label_codec import CellDetection, LabelPair, cell_to_pixels, decode_cells

log = logging.getLogger(__name__)

# vertical gap (px) under which two fitted lines count as coincident over the
# whole intersect range. Fits of disjoint cell subsets of one stair line
# diverge by up to ~1e-3 px (f32 location quantization), while distinct stair
# lines sit at least a cell row (8 px) apart; half a pixel separates the two
# regimes with orders of magnitude to spare.
_COINCIDENT_EPS = 0.5


class DegenerateFitError(ValueError):
    """A cell group with (near-)zero x-spread cannot be fitted as y = kx + b."""


@dataclass
class LinkerConfig:
    confidence_threshold: float = 0.75
    top_k: int = 50
    intersect_range: tuple[float, float] = (0.0, 512.0)
    endpoint_close_px: float | None = None  # default 2 * stride_h, resolved per-geometry

    def __post_init__(self):
        if not 0.0 < self.confidence_threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.confidence_threshold}")
        if self.top_k < 2:
            raise ValueError(f"top_k must be >= 2, got {self.top_k}")

    def resolved_endpoint_close(self, geom: GridGeometry) -> float:
        return 2.0 * geom.stride_h if self.endpoint_close_px is None else self.endpoint_close_px


@dataclass
class CellGroup:
    members: list[CellDetection]
    fitted: LineEquation | None = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("empty cell group")
        kinds = {m.kind for m in self.members}
        if len(kinds) != 1:
            raise ValueError(f"mixed kinds in one group: {kinds}")

    @property
    def kind(self) -> str:
        return self.members[0].kind


def select_cells(dets: list[CellDetection], cfg: LinkerConfig) -> list[CellDetection]:
    """Keep detections at/above the confidence threshold, then the top-k.

    Relies on the decode ordering (confidence desc, ties by row/col), so the
    truncation is stable and reproducible.
    """
    kept = [d for d in dets if d.confidence >= cfg.confidence_threshold]
    return kept[: cfg.top_k]


def group_adjacent(cells: list[CellDetection]) -> list[CellGroup]:
    """Connected components of cells under 8-connectivity on (row, col)."""
    if not cells:
        return []
    index = {}
    for d in cells:
        index.setdefault((d.row, d.col), d)

    seen: set[tuple[int, int]] = set()
    groups = []
    for start in index:
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            r, c = stack.pop()
            comp.append(index[(r, c)])
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    nb = (r + dr, c + dc)
                    if nb != (r, c) and nb in index and nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
        comp.sort(key=lambda d: (d.row, d.col))
        groups.append(CellGroup(members=comp))
    groups.sort(key=lambda g: min((m.row, m.col) for m in g.members))
    return groups


def drop_singletons(groups: list[CellGroup]) -> list[CellGroup]:
    """Remove groups with a single cell, preserving order."""
    return [g for g in groups if len(g.members) > 1]


def _fit_points(group: CellGroup, geom: GridGeometry):
    xs, ys = [], []
    for det in group.members:
        seg = cell_to_pixels(det, geom)
        xs.extend((seg.x1, seg.x2))
        ys.extend((seg.y1, seg.y2))
    return xs, ys


def fit_group(group: CellGroup, geom: GridGeometry) -> LineEquation:
    """Ordinary least squares over both endpoints of every member cell."""
    if len(group.members) < 2:
        raise ValueError("fit_group needs at least 2 member cells")
    xs, ys = _fit_points(group, geom)
    k, b = _ols(xs, ys)
    return LineEquation(
        kind=group.kind,
        k=k,
        b=b,
        x_min=min(xs),
        x_max=max(xs),
        source_cells=len(group.members),
    )


def _ols(xs, ys) -> tuple[float, float]:
    """Slope/intercept minimizing sum (y - kx - b)^2, in f64 centered form."""
    n = len(xs)
    if max(xs) - min(xs) < 1.0:
        raise DegenerateFitError(
            f"x-spread {max(xs) - min(xs):.3g} px < 1 px (near-vertical group)"
        )
    xm = math.fsum(xs) / n
    ym = math.fsum(ys) / n
    sxx = math.fsum((x - xm) ** 2 for x in xs)
    sxy = math.fsum((x - xm) * (y - ym) for x, y in zip(xs, ys))
    k = sxy / sxx
    return k, ym - k * xm


def _lines_meet(a: LineEquation, b: LineEquation, cfg: LinkerConfig) -> bool:
    """True when some x in intersect_range has equal y on both lines.

    Coincident lines (split halves of one stair line fit to identical
    equations) meet everywhere; test them by vertical gap at the range ends
    before falling back to the single-crossing formula.
    """
    lo, hi = cfg.intersect_range
    if (
        abs(a.y_at(lo) - b.y_at(lo)) <= _COINCIDENT_EPS
        and abs(a.y_at(hi) - b.y_at(hi)) <= _COINCIDENT_EPS
    ):
        return True
    dk = a.k - b.k
    if dk == 0.0:
        return False
    x_cross = (b.b - a.b) / dk
    return lo <= x_cross <= hi


def _endpoints_close(a: LineEquation, b: LineEquation, tol: float) -> bool:
    for xa, xb in ((a.x_min, b.x_min), (a.x_max, b.x_max)):
        if math.hypot(xa - xb, a.y_at(xa) - b.y_at(xb)) <= tol:
            return True
    return False


def merge_groups(
    groups: list[CellGroup], cfg: LinkerConfig, geom: GridGeometry
) -> list[LineEquation]:
    """Merge mergeable groups transitively, then refit the merged ones.

    Two groups are mergeable when their fitted lines meet inside the
    intersect range or their left (or right) endpoints are close. Mergeable
    is evaluated on the initial fits; transitive closure keeps the outcome
    independent of scan order. Groups that never merge keep their first fit,
    so every output line costs at most two least-squares rounds.
    """
    groups = [g for g in groups if g.fitted is not None]
    n = len(groups)
    if n == 0:
        return []
    tol = cfg.resolved_endpoint_close(geom)

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            a, b = groups[i].fitted, groups[j].fitted
            if _lines_meet(a, b, cfg) or _endpoints_close(a, b, tol):
                parent[find(j)] = find(i)

    merged: dict[int, list[int]] = {}
    for i in range(n):
        merged.setdefault(find(i), []).append(i)

    out = []
    for root in sorted(merged, key=lambda r: min(merged[r])):
        idxs = merged[root]
        if len(idxs) == 1:
            out.append(groups[idxs[0]].fitted)
            continue
        combined = CellGroup(members=[m for i in idxs for m in groups[i].members])
        try:
            out.append(fit_group(combined, geom))
        except DegenerateFitError as exc:
            log.warning("discarding merged group: %s", exc)
    return out


def link_lines(
    convex: LabelPair | None,
    concave: LabelPair | None,
    cfg: LinkerConfig,
    geom: GridGeometry,
) -> list[LineEquation]:
    """Full linking pipeline over both kinds; top-of-image lines first."""
    equations: list[LineEquation] = []
    for labels in (convex, concave):
        if labels is None:
            continue
        dets = decode_cells(labels, cfg.confidence_threshold)
        cells = select_cells(dets, cfg)
        groups = drop_singletons(group_adjacent(cells))
        fitted = []
        for g in groups:
            try:
                fitted.append(replace(g, fitted=fit_group(g, geom)))
            except DegenerateFitError as exc:
                log.warning("discarding %s group: %s", g.kind, exc)
        equations.extend(merge_groups(fitted, cfg, geom))
    equations.sort(key=lambda e: e.mean_y)
    return equations


# ---------------------------------------------------------------------------
# Equations CSV:  kind,k,b,x_min,x_max,cells  (6-decimal fixed)
# ---------------------------------------------------------------------------

def write_equations_csv(equations: list[LineEquation], path) -> None:
    import csv

    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "k", "b", "x_min", "x_max", "cells"])
        for e in equations:
            writer.writerow(
                [e.kind, f"{e.k:.6f}", f"{e.b:.6f}", f"{e.x_min:.6f}", f"{e.x_max:.6f}", e.source_cells]
            )
