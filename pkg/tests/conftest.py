"""Shared helpers: randomized stair-scene sampling with truth-side checks.

Two samplers are provided. ``sample_specs`` draws free-form but valid scenes
(at least one visible line) for roundtrip-style tests. ``sample_linker_specs``
additionally constrains the ground truth to scenes the cell-linking method
can resolve at all: every line long enough to occupy several cells, same-kind
lines separated by more than one cell row, and no same-kind pair whose
extended equations cross inside (a margin around) the image x-range. The
constraints are evaluated on ground-truth lines only, never on pipeline
output.
"""

from __future__ import annotations

import math

import numpy as np

from stairkit.core import CameraIntrinsics, KINDS, LineSegment
from stairkit.synth import StairSpec, scene_lines

MIN_LINE_SPAN_PX = 96.0     # >= 6 grid columns
MAX_ABS_SLOPE = 0.35
MIN_KIND_SEPARATION_PX = 20.0   # 2.5 cell rows
CROSS_MARGIN_PX = 50.0          # same-kind equations must cross outside [-50, 562]
MAX_KIND_LENGTH_PX = 2200.0     # keeps per-kind cell counts within the top-50 budget


def line_kb(line: LineSegment) -> tuple[float, float]:
    """Slope/intercept of a ground-truth segment."""
    k = (line.y2 - line.y1) / (line.x2 - line.x1)
    return k, line.y1 - k * line.x1


def _draw_spec(rng: np.random.Generator, steps: int) -> StairSpec:
    riser_h = rng.uniform(0.14, 0.20)
    tread_d = rng.uniform(0.26, 0.34)
    width = rng.uniform(1.2, 1.8)
    total_h = steps * riser_h
    total_d = steps * tread_d
    dz = rng.uniform(1.6, 2.6)
    hc = rng.uniform(0.4, 0.8) * total_h + rng.uniform(0.2, 0.4)
    # aim roughly at the staircase middle, with jitter
    pitch = math.atan2(hc - 0.5 * total_h, dz + 0.5 * total_d) + rng.uniform(-0.06, 0.06)
    return StairSpec(
        steps=steps,
        riser_h=riser_h,
        tread_d=tread_d,
        width=width,
        pitch=pitch,
        yaw=rng.uniform(-0.15, 0.15),
        roll=rng.uniform(-0.10, 0.10),
        position=(rng.uniform(-0.2, 0.2), -hc, -dz),
        K=CameraIntrinsics(fx=450.0, fy=450.0, cx=256.0, cy=256.0),
    )


def sample_specs(n: int, seed: int, max_steps: int = 8) -> list[StairSpec]:
    """Valid scenes with at least one visible, encodable line."""
    rng = np.random.default_rng(seed)
    out = []
    i = 0
    while len(out) < n:
        spec = _draw_spec(rng, steps=i % max_steps + 1)
        i += 1
        lines = scene_lines(spec)
        if lines and all(line.length > 2.0 for line in lines):
            out.append(spec)
    return out


def _linker_resolvable(spec: StairSpec) -> bool:
    lines = scene_lines(spec)
    if len(lines) != 2 * spec.steps:
        return False
    for line in lines:
        if line.x2 - line.x1 < MIN_LINE_SPAN_PX:
            return False
        k, _ = line_kb(line)
        if abs(k) > MAX_ABS_SLOPE:
            return False
    for kind in KINDS:
        of_kind = [line for line in lines if line.kind == kind]
        if sum(line.length for line in of_kind) > MAX_KIND_LENGTH_PX:
            return False
        for i in range(len(of_kind)):
            for j in range(i + 1, len(of_kind)):
                ki, bi = line_kb(of_kind[i])
                kj, bj = line_kb(of_kind[j])
                lo = max(of_kind[i].x1, of_kind[j].x1)
                hi = min(of_kind[i].x2, of_kind[j].x2)
                if hi <= lo:  # no shared x-domain; check at each line's middle
                    lo = hi = 0.5 * (of_kind[i].x1 + of_kind[i].x2)
                for x in (lo, hi):
                    if abs((ki * x + bi) - (kj * x + bj)) < MIN_KIND_SEPARATION_PX:
                        return False
                if abs(ki - kj) > 1e-12:
                    x_cross = (bj - bi) / (ki - kj)
                    if -CROSS_MARGIN_PX <= x_cross <= 512.0 + CROSS_MARGIN_PX:
                        return False
    return True


def sample_linker_specs(n: int, seed: int, max_steps: int = 8) -> list[StairSpec]:
    """Scenes whose ground truth the linking method can resolve."""
    rng = np.random.default_rng(seed)
    out = []
    i = 0
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 200 * n:
            raise RuntimeError(f"scene sampler stalled after {attempts} attempts")
        spec = _draw_spec(rng, steps=i % max_steps + 1)
        if _linker_resolvable(spec):
            out.append(spec)
            i += 1
    return out
