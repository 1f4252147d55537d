"""
Unit tests for report serialization, CSV tables and SVG rendering.
"""

import numpy as np
import pytest

from src.domain.evaluation.budget import BudgetCell
from src.domain.evaluation.protocol import DatapointRecord, Report
from src.presentation.reports import (NON_IMPROVING_MARK, budget_frame, cells_frame, frequencies_frame,
                                      heatmap_frame, quadrants_frame, read_report_json, report_from_dict,
                                      report_to_dict, write_report_json, write_report_tables)
from src.presentation.svg import SvgCanvas, frequency_bars, heatmap, relert_histogram, survival_plot
from src.utils.exceptions import SerializationError


def make_report() -> Report:
    records = [
        DatapointRecord(1, 2, 1, 0, 0, 0, 0, 1, 1.0, 3.0, 2.5),
        DatapointRecord(3, 2, 2, 1, 1, 1, 0, 1, 4.0, 3.0, 2.5),
        DatapointRecord(15, 5, 1, 0, 0, 0, 0, 1, 1.0, 1500.0, 2.5),
        DatapointRecord(16, 5, 3, 2, 2, 1, 1, 1, 1.0, 1.0, 2.5),
    ]
    return Report.from_records("Random", ["solver1", "solver2"], records, num_models=3)


class TestReportJson:
    def setup_method(self):
        self.report = make_report()

    def test_round_trip_recomputes_summaries(self, tmp_path):
        """测试 JSON 读回后由原始记录重算的汇总与原报告一致。"""
        path = write_report_json(self.report, tmp_path / "report.json")
        restored = read_report_json(path)
        assert restored.records == self.report.records
        assert restored.num_models == 3
        assert report_to_dict(restored) == report_to_dict(self.report)

    def test_json_is_byte_stable(self, tmp_path):
        """测试同一报告重复写出的字节相同。"""
        a = write_report_json(self.report, tmp_path / "a.json").read_bytes()
        b = write_report_json(make_report(), tmp_path / "b.json").read_bytes()
        assert a == b

    def test_version_and_malformed(self):
        """测试版本不匹配与缺少字段。"""
        data = report_to_dict(self.report)
        with pytest.raises(SerializationError):
            report_from_dict(dict(data, format_version=99))
        broken = dict(data)
        del broken["records"]
        with pytest.raises(SerializationError):
            report_from_dict(broken)


class TestTables:
    def setup_method(self):
        self.report = make_report()

    def test_cells_frame_layout(self):
        """测试统计表列与非改进标记。"""
        frame = cells_frame(self.report)
        assert {"group", "dimension", "sbs_median", "selector_p90", "closure_mean", "flag_mean",
                "accuracy"} <= set(frame.columns)
        overall = frame[(frame["group"] == "all") & (frame["dimension"] == "all")].iloc[0]
        assert overall["count"] == 4
        cell = frame[(frame["group"] == "f1-f5") & (frame["dimension"] == "2")].iloc[0]
        assert cell["closure_p90"] < 0 and cell["flag_p90"] == NON_IMPROVING_MARK
        assert cell["closure_mean"] > 0 and cell["flag_mean"] == ""

    def test_quadrants_and_frequencies(self):
        """测试象限表行和与频率表。"""
        quadrants = quadrants_frame(self.report)
        assert list(quadrants.columns) == ["threshold", "Neither", "SBS-only", "Both", "AS-only", "total"]
        assert (quadrants[["Neither", "SBS-only", "Both", "AS-only"]].sum(axis=1) == quadrants["total"]).all()
        freq = frequencies_frame(self.report)
        assert freq["algorithm"].tolist() == ["solver1", "solver2"]
        assert freq["selector_all"].tolist() == [0.5, 0.5]

    def test_budget_frames(self):
        """测试预算扫描表与热力图网格。"""
        cells = [BudgetCell(4, 4, 64, (1.5, 1.2, 2.0), 0.01), BudgetCell(4, 8, 256, (1.2, 1.1, 1.5), 0.02)]
        budget = budget_frame(cells)
        assert budget["evaluations"].tolist() == [64, 256]
        assert budget["selector_median"].tolist() == [1.2, 1.1]
        grid = heatmap_frame(cells)
        assert list(grid.columns) == ["k", "r=4", "r=8"]
        assert grid.iloc[0]["r=8"] == 1.1

    def test_write_tables(self, tmp_path):
        """测试三个 CSV 写出且内容稳定。"""
        paths = write_report_tables(self.report, tmp_path, prefix="random_")
        assert [p.name for p in paths] == ["random_cells.csv", "random_quadrants.csv", "random_frequencies.csv"]
        again = write_report_tables(make_report(), tmp_path / "again", prefix="random_")
        assert [p.read_bytes() for p in paths] == [p.read_bytes() for p in again]


class TestSvg:
    def test_rerender_is_byte_identical(self):
        """测试相同输入的四种图逐字节相同。"""
        report = make_report()
        survival = report.survival()

        def render_all():
            return [
                relert_histogram({"selector": [r.as_relert for r in report.records],
                                  "SBS": [r.sbs_relert for r in report.records]}).render(),
                survival_plot(survival["t"], {"selector": survival["selector"], "SBS": survival["sbs"]}).render(),
                frequency_bars(report.algorithms, report.frequencies).render(),
                heatmap([4, 8], [4, 8], np.array([[1.0, 2.0], [np.nan, 3.0]])).render(),
            ]

        first, second = render_all(), render_all()
        assert first == second
        for text in first:
            assert text.startswith('<?xml version="1.0"')
            assert text.rstrip().endswith("</svg>")

    def test_text_is_escaped(self):
        """测试文本中的 XML 特殊字符被转义。"""
        canvas = SvgCanvas(title="a < b & c")
        assert "a &lt; b &amp; c" in canvas.render()

    def test_heatmap_marks_missing_cells(self):
        """测试 NaN 格子以灰色与 n/a 标出。"""
        text = heatmap(["x"], ["y", "z"], np.array([[np.nan, 2.0]])).render()
        assert "#cccccc" in text and "n/a" in text

    def test_save_writes_file(self, tmp_path):
        """测试保存到嵌套目录。"""
        path = SvgCanvas(title="t").save(tmp_path / "plots" / "t.svg")
        assert path.read_text(encoding="utf-8").count("<svg") == 1
