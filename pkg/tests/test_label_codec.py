"""Gaussian encoding and cell decoding, checked against independent clippers."""

import math

import numpy as np
import pytest
from shapely.geometry import LineString, box

from stairkit.core import (
    CONCAVE,
    CONVEX,
    BoundsError,
    DegenerateLineError,
    GridGeometry,
    LineSegment,
)
from stairkit.label_codec import (
    CellDetection,
    cell_to_pixels,
    decode_cells,
    encode_lines,
    gaussian_response,
    pixel_to_cell,
    raster_step,
    read_lines_csv,
    write_lines_csv,
)

GEOM = GridGeometry()


def shapely_cell_clip(line: LineSegment, row: int, col: int, geom: GridGeometry):
    """Independent line/cell intersection via shapely."""
    cell = box(
        col * geom.stride_w,
        row * geom.stride_h,
        (col + 1) * geom.stride_w,
        (row + 1) * geom.stride_h,
    )
    inter = LineString([(line.x1, line.y1), (line.x2, line.y2)]).intersection(cell)
    if inter.is_empty:
        return None
    coords = list(inter.coords)
    (x1, y1), (x2, y2) = coords[0], coords[-1]
    if (x1, y1) > (x2, y2):
        x1, y1, x2, y2 = x2, y2, x1, y1
    return x1, y1, x2, y2


def traversed_cells(line: LineSegment, geom: GridGeometry):
    """Cells hit by quarter-stride sampling (the encode traversal contract)."""
    step = raster_step(geom)
    n = max(1, math.ceil(line.length / step))
    cells = set()
    for i in range(n + 1):
        if i == n:
            x, y = line.x2, line.y2
        else:
            t = i / n
            x = line.x1 + t * (line.x2 - line.x1)
            y = line.y1 + t * (line.y2 - line.y1)
        cells.add(pixel_to_cell(x, y, geom))
    return cells


class TestGaussianResponse:
    def test_midpoint_is_exp_minus_half(self):
        line = LineSegment(CONVEX, 0, 0, 100, 0)
        assert gaussian_response(50, 0, line) == pytest.approx(math.exp(-0.5), abs=1e-12)

    def test_endpoint_is_one(self):
        line = LineSegment(CONVEX, 0, 0, 100, 0)
        assert gaussian_response(0, 0, line) == 1.0

    def test_quarter_point(self):
        # sigma = 50, nearer endpoint (0, 0), d^2 = 625 -> exp(-0.125)
        line = LineSegment(CONVEX, 0, 0, 100, 0)
        assert gaussian_response(25, 0, line) == pytest.approx(math.exp(-0.125), abs=1e-12)

    def test_degenerate_line(self):
        with pytest.raises(DegenerateLineError):
            gaussian_response(0, 0, LineSegment(CONVEX, 5, 5, 5, 5))

    def test_symmetric_under_endpoint_swap(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            x1, y1, x2, y2 = rng.uniform(0, 511, size=4)
            if math.hypot(x2 - x1, y2 - y1) < 1e-6:
                continue
            a = LineSegment(CONVEX, x1, y1, x2, y2)
            b = LineSegment(CONVEX, x2, y2, x1, y1)
            t = rng.uniform()
            qx, qy = x1 + t * (x2 - x1), y1 + t * (y2 - y1)
            assert gaussian_response(qx, qy, a) == gaussian_response(qx, qy, b)


class TestPixelToCell:
    def test_examples(self):
        assert pixel_to_cell(100, 200, GEOM) == (25, 6)
        assert pixel_to_cell(0, 0, GEOM) == (0, 0)
        assert pixel_to_cell(511, 511, GEOM) == (63, 31)

    def test_out_of_bounds(self):
        with pytest.raises(BoundsError):
            pixel_to_cell(512, 0, GEOM)
        with pytest.raises(BoundsError):
            pixel_to_cell(0, -1, GEOM)


class TestEncode:
    def test_empty_input(self):
        convex, concave = encode_lines([], GEOM)
        assert not convex.heatmap.data.any()
        assert not convex.locations.data.any()
        assert not concave.heatmap.data.any()

    def test_horizontal_line_row12(self):
        convex, concave = encode_lines([LineSegment(CONVEX, 0, 100, 511, 100)], GEOM)
        h = convex.heatmap.data[:, :, 0]
        rows, cols = np.nonzero(h)
        assert set(rows) == {12}
        assert len(cols) == 32
        assert h[12, 0] == 1.0 and h[12, 31] == 1.0
        assert not concave.heatmap.data.any()

    def test_full_cell_span_locations(self):
        # gentle slope crossing cell (12, 15) fully: x in [240, 256)
        line = LineSegment(CONVEX, 0, 98, 511, 102)
        convex, _ = encode_lines([line], GEOM)
        k = (line.y2 - line.y1) / (line.x2 - line.x1)
        y_at = lambda x: line.y1 + k * (x - line.x1)
        row = int(y_at(248) // 8)
        x1n, y1n, x2n, y2n = convex.locations.data[row, 15]
        assert x1n == pytest.approx(0.0, abs=1e-6)
        assert x2n == pytest.approx(1.0, abs=1e-6)
        assert y1n * 8 + row * 8 == pytest.approx(y_at(240), abs=1e-4)
        assert y2n * 8 + row * 8 == pytest.approx(y_at(256), abs=1e-4)

    def test_out_of_bounds_segment_named(self):
        with pytest.raises(BoundsError, match="convex"):
            encode_lines([LineSegment(CONVEX, -1, 10, 100, 10)], GEOM)

    def test_zero_length_rejected(self):
        with pytest.raises(DegenerateLineError):
            encode_lines([LineSegment(CONVEX, 5, 5, 5, 5)], GEOM)

    def test_overlap_keeps_max_and_its_locations(self):
        # both lines traverse cell (12, 15); the short one peaks there
        long_line = LineSegment(CONVEX, 0, 100, 511, 100)
        short = LineSegment(CONVEX, 240, 101, 255, 101)
        convex, _ = encode_lines([long_line, short], GEOM)
        h = convex.heatmap.data[:, :, 0]
        assert h[12, 15] == 1.0  # short line's endpoint cell wins
        y1n = convex.locations.data[12, 15][1]
        assert y1n * 8 + 96 == pytest.approx(101.0, abs=1e-5)

    def test_kinds_never_share_state(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            x1, x2 = sorted(rng.uniform(0, 511, size=2))
            y1, y2 = rng.uniform(0, 511, size=2)
            if math.hypot(x2 - x1, y2 - y1) < 2:
                continue
            convex, concave = encode_lines([LineSegment(CONVEX, x1, y1, x2, y2)], GEOM)
            assert not concave.heatmap.data.any()
            assert not concave.locations.data.any()

    def test_endpoint_and_midpoint_cell_values(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            x1, x2 = sorted(rng.uniform(0, 511, size=2))
            y1, y2 = rng.uniform(0, 511, size=2)
            line = LineSegment(CONVEX, x1, y1, x2, y2)
            if line.length < 20:
                continue
            convex, _ = encode_lines([line], GEOM)
            h = convex.heatmap.data[:, :, 0]
            for ex, ey in line.endpoints():
                r, c = pixel_to_cell(ex, ey, GEOM)
                assert h[r, c] == 1.0
            mx, my = (x1 + x2) / 2, (y1 + y2) / 2
            r, c = pixel_to_cell(mx, my, GEOM)
            assert h[r, c] >= math.exp(-0.5) - 0.02


class TestDecode:
    def test_blank_at_075(self):
        convex, _ = encode_lines([], GEOM)
        assert decode_cells(convex, 0.75) == []

    def test_roundtrip_cells_at_05(self):
        convex, _ = encode_lines([LineSegment(CONVEX, 0, 100, 511, 100)], GEOM)
        h = convex.heatmap.data[:, :, 0]
        expected = {(r, c) for r, c in zip(*np.nonzero(h >= 0.5))}
        got = {(d.row, d.col) for d in decode_cells(convex, 0.5)}
        assert got == expected

    def test_sorted_by_confidence(self):
        convex, _ = encode_lines([LineSegment(CONVEX, 8, 100, 200, 100)], GEOM)
        dets = decode_cells(convex, 0.1)
        confs = [d.confidence for d in dets]
        assert confs == sorted(confs, reverse=True)

    def test_ties_by_row_col(self):
        convex, _ = encode_lines([LineSegment(CONVEX, 0, 100, 511, 100)], GEOM)
        dets = decode_cells(convex, 0.999999)  # the two 1.0 endpoint cells
        assert [(d.row, d.col) for d in dets][:2] == [(12, 0), (12, 31)]

    def test_two_cells_strongest_first(self):
        import numpy as np

        from stairkit.core import TensorGrid
        from stairkit.label_codec import LabelPair

        heat = np.zeros((2, 2, 1), dtype=np.float32)
        heat[0, 1, 0] = 0.8
        heat[1, 0, 0] = 0.9
        loc = np.zeros((2, 2, 4), dtype=np.float32)
        loc[0, 1] = loc[1, 0] = 0.5
        pair = LabelPair(TensorGrid(heat), TensorGrid(loc), CONVEX)
        confs = [d.confidence for d in decode_cells(pair, 0.5)]
        assert confs == pytest.approx([0.9, 0.8])


class TestCellToPixels:
    def test_example(self):
        det = CellDetection(row=12, col=0, confidence=1.0, endpoints=(0, 0.5, 1, 0.5), kind=CONVEX)
        seg = cell_to_pixels(det, GEOM)
        assert (seg.x1, seg.y1, seg.x2, seg.y2) == (0, 100, 16, 100)

    def test_degenerate_flagged(self):
        det = CellDetection(row=0, col=0, confidence=0.0, endpoints=(0, 0, 0, 0), kind=CONVEX)
        seg = cell_to_pixels(det, GEOM)
        assert seg.is_degenerate
        assert (seg.x1, seg.y1, seg.x2, seg.y2) == (0, 0, 0, 0)

    def test_roundtrip_against_encode_clipper(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            x1, x2 = sorted(rng.uniform(0, 511, size=2))
            y1, y2 = rng.uniform(0, 511, size=2)
            line = LineSegment(CONVEX, x1, y1, x2, y2)
            if line.length < 5:
                continue
            convex, _ = encode_lines([line], GEOM)
            for det in decode_cells(convex, 1e-9):
                if det.confidence == 0:
                    continue
                seg = cell_to_pixels(det, GEOM)
                oracle = shapely_cell_clip(line, det.row, det.col, GEOM)
                assert oracle is not None
                ox1, oy1, ox2, oy2 = oracle
                assert seg.x1 == pytest.approx(ox1, abs=1e-5)
                assert seg.y1 == pytest.approx(oy1, abs=1e-5)
                assert seg.x2 == pytest.approx(ox2, abs=1e-5)
                assert seg.y2 == pytest.approx(oy2, abs=1e-5)


class TestEncodeDecodeRoundtrip:
    def test_all_traversed_cells_recovered_within_step(self):
        rng = np.random.default_rng(17)
        step = raster_step(GEOM)
        for _ in range(20):
            x1, x2 = sorted(rng.uniform(0, 511, size=2))
            y1, y2 = rng.uniform(0, 511, size=2)
            line = LineSegment(CONVEX, x1, y1, x2, y2)
            if line.length < 5:
                continue
            convex, _ = encode_lines([line], GEOM)
            decoded = {(d.row, d.col): d for d in decode_cells(convex, 0.0) if d.confidence > 0}
            cells = traversed_cells(line, GEOM)
            assert set(decoded) == cells
            for (row, col) in cells:
                seg = cell_to_pixels(decoded[(row, col)], GEOM)
                oracle = shapely_cell_clip(line, row, col, GEOM)
                d1 = math.hypot(seg.x1 - oracle[0], seg.y1 - oracle[1])
                d2 = math.hypot(seg.x2 - oracle[2], seg.y2 - oracle[3])
                assert max(d1, d2) <= step


class TestLinesCsv:
    def test_roundtrip(self, tmp_path):
        lines = [
            LineSegment(CONVEX, 1.25, 2.5, 100.75, 3.5),
            LineSegment(CONCAVE, 0.0, 50.0, 511.0, 51.0),
        ]
        path = tmp_path / "lines.csv"
        write_lines_csv(lines, path)
        back = read_lines_csv(path)
        assert len(back) == 2
        for a, b in zip(lines, back):
            assert a.kind == b.kind
            assert b.x1 == pytest.approx(a.x1, abs=1e-6)
            assert b.y2 == pytest.approx(a.y2, abs=1e-6)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="header"):
            read_lines_csv(path)
