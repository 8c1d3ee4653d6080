import re

import numpy as np
import pytest

from nlbellman.experiments import SweepResult, action_gap_sweep, discount_curves
from nlbellman.io import (VERDICT_COLUMNS, UnsupportedShape, emit_csv, emit_svg_lineplot, fmt,
                          read_csv)
from nlbellman.returns import verify_ordering_equivalence


class TestCsv:
    def test_empty_verdicts_header_only(self, tmp_path):
        emit_csv([], tmp_path / "v.csv")
        assert (tmp_path / "v.csv").read_text() == ",".join(VERDICT_COLUMNS) + "\n"

    def test_two_by_two(self, tmp_path):
        res = SweepResult([("a", [1, 2]), ("b", [0.5, 0.25])], [[1.0, 2.0], [3.0, 4.0]])
        emit_csv(res, tmp_path / "s.csv")
        header, rows = read_csv(tmp_path / "s.csv")
        assert header == ["a", "b", "value"]
        assert rows == [[1, 0.5, 1.0], [1, 0.25, 2.0], [2, 0.5, 3.0], [2, 0.25, 4.0]]

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        cells = rng.normal(size=(3, 4)) * 10.0 ** rng.integers(-30, 30, size=(3, 4))
        res = SweepResult([("x", [0.1, 0.2, 0.3]), ("y", list(range(4)))], cells)
        emit_csv(res, tmp_path / "s.csv")
        _, rows = read_csv(tmp_path / "s.csv")
        np.testing.assert_array_equal(np.array([r[-1] for r in rows]).reshape(3, 4), cells)

    def test_lf_and_17_digits(self, tmp_path):
        emit_csv(SweepResult([("x", [1])], [1 / 3]), tmp_path / "s.csv")
        data = (tmp_path / "s.csv").read_bytes()
        assert b"\r" not in data
        assert b"0.33333333333333331" in data

    def test_verdict_rows(self, tmp_path):
        verdicts = verify_ordering_equivalence(0.9, 0.1, 1.0, [0.5, 2.0], [0, 3])
        emit_csv(verdicts, tmp_path / "v.csv")
        header, rows = read_csv(tmp_path / "v.csv")
        assert header == VERDICT_COLUMNS
        assert len(rows) == 4
        assert all(isinstance(r[5], bool) for r in rows)

    def test_io_error_names_path(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            emit_csv([], tmp_path / "missing" / "v.csv")

    def test_fmt(self):
        assert fmt(True) == "true" and fmt(np.int64(3)) == "3" and fmt(0.1) == "0.10000000000000001"


class TestSvg:
    def test_discount_curves(self, tmp_path):
        res = discount_curves([0.25, 0.5, 0.9])
        emit_svg_lineplot(res, tmp_path / "c.svg")
        svg = (tmp_path / "c.svg").read_text()
        polylines = re.findall(r"<polyline[^>]*>", svg)
        assert len(polylines) == 6
        assert sum("stroke-dasharray" in p for p in polylines) == 3
        assert 'class="zero"' in svg
        assert "http" not in svg.replace('xmlns="http://www.w3.org/2000/svg"', "")

    def test_gap_plot(self, tmp_path):
        res = action_gap_sweep()
        emit_svg_lineplot(res, tmp_path / "g.svg")
        svg = (tmp_path / "g.svg").read_text()
        assert svg.count("<polyline") == len(res.ticks("p"))
        assert "p=0.05" in svg

    def test_single_point(self, tmp_path):
        res = SweepResult([("s", ["only"]), ("x", [2.0])], [[5.0]])
        emit_svg_lineplot(res, tmp_path / "one.svg")
        assert (tmp_path / "one.svg").read_text().count("<polyline") == 1

    def test_too_many_axes(self, tmp_path):
        res = SweepResult([("a", [1]), ("b", [1]), ("c", [1])], np.zeros((1, 1, 1)))
        with pytest.raises(UnsupportedShape):
            emit_svg_lineplot(res, tmp_path / "x.svg")
