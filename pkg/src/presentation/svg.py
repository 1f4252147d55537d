"""
纯文本 SVG 图表：relERT 直方图（对数横轴）、生存曲线、选择频率柱状图与预算热力图。

输出只依赖输入数据；所有坐标按固定位数格式化，同一 Report 重复渲染得到逐字节相同的文件。
"""

import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from ..infrastructure.logger import get_logger

logger = get_logger(__name__)

WIDTH = 640
HEIGHT = 400
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _num(value: float) -> str:
    return f"{value:.2f}"


class SvgCanvas:
    """累积 SVG 元素，最后一次性输出文本。"""

    def __init__(self, width: int = WIDTH, height: int = HEIGHT, title: str = ""):
        self.width = width
        self.height = height
        self.elements: List[str] = []
        self.elements.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>')
        if title:
            self.text(width / 2, MARGIN_TOP / 2 + 5, title, size=14, anchor="middle")

    @property
    def plot_box(self) -> Tuple[float, float, float, float]:
        """绘图区 (x0, y0, x1, y1)，y0 为上边。"""
        return (MARGIN_LEFT, MARGIN_TOP, self.width - MARGIN_RIGHT, self.height - MARGIN_BOTTOM)

    def rect(self, x: float, y: float, w: float, h: float, fill: str, stroke: str = "none"):
        self.elements.append(f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(max(w, 0.0))}" '
                             f'height="{_num(max(h, 0.0))}" fill="{fill}" stroke="{stroke}"/>')

    def line(self, x1: float, y1: float, x2: float, y2: float, stroke: str = "#000000", width: float = 1.0):
        self.elements.append(f'<line x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}" '
                             f'stroke="{stroke}" stroke-width="{_num(width)}"/>')

    def polyline(self, points: Sequence[Tuple[float, float]], stroke: str, width: float = 1.5):
        coords = " ".join(f"{_num(x)},{_num(y)}" for x, y in points)
        self.elements.append(f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
                             f'stroke-width="{_num(width)}"/>')

    def text(self, x: float, y: float, content: str, size: int = 11, anchor: str = "start",
             rotate: bool = False):
        transform = f' transform="rotate(-90 {_num(x)} {_num(y)})"' if rotate else ""
        self.elements.append(f'<text x="{_num(x)}" y="{_num(y)}" font-family="monospace" font-size="{size}" '
                             f'text-anchor="{anchor}"{transform}>{escape(content)}</text>')

    def axes(self, x_label: str, y_label: str):
        x0, y0, x1, y1 = self.plot_box
        self.line(x0, y1, x1, y1)
        self.line(x0, y0, x0, y1)
        self.text((x0 + x1) / 2, self.height - 15, x_label, anchor="middle")
        self.text(18, (y0 + y1) / 2, y_label, anchor="middle", rotate=True)

    def legend(self, entries: Sequence[Tuple[str, str]]):
        x = self.plot_box[2] - 150
        y = self.plot_box[1] + 10
        for n, (label, colour) in enumerate(entries):
            self.rect(x, y + n * 16 - 9, 10, 10, colour)
            self.text(x + 16, y + n * 16, label)

    def render(self) -> str:
        body = "\n".join(self.elements)
        return (f'<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n{body}\n</svg>\n')

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.render())
        logger.debug(f"SVG written: {path}")
        return path


def _log_ticks(upper_exp: int) -> List[int]:
    return list(range(0, upper_exp + 1))


def relert_histogram(series: Dict[str, Sequence[float]], bins: int = 20,
                     title: str = "relERT distribution") -> SvgCanvas:
    """各序列 relERT 的直方图；横轴为 log10(relERT)。"""
    canvas = SvgCanvas(title=title)
    x0, y0, x1, y1 = canvas.plot_box
    upper = max(max(v) for v in series.values())
    upper_exp = max(1, int(math.ceil(math.log10(max(upper, 1.0)))))
    edges = np.linspace(0.0, float(upper_exp), bins + 1)
    counts = {name: np.histogram(np.log10(np.maximum(np.asarray(v, dtype=np.float64), 1.0)), bins=edges)[0]
              for name, v in series.items()}
    peak = max(int(c.max()) for c in counts.values()) or 1
    slot = (x1 - x0) / bins
    width = slot / max(len(series), 1)
    for s, (name, c) in enumerate(counts.items()):
        colour = PALETTE[s % len(PALETTE)]
        for b, count in enumerate(c):
            h = (y1 - y0) * count / peak
            canvas.rect(x0 + b * slot + s * width, y1 - h, width, h, colour)
    for e in _log_ticks(upper_exp):
        x = x0 + (x1 - x0) * e / upper_exp
        canvas.line(x, y1, x, y1 + 5)
        canvas.text(x, y1 + 18, f"1e{e}", anchor="middle")
    canvas.text(x0 - 8, y0 + 4, str(peak), anchor="end")
    canvas.axes("relERT (log scale)", "datapoints")
    canvas.legend([(name, PALETTE[s % len(PALETTE)]) for s, name in enumerate(series)])
    return canvas


def survival_plot(thresholds: Sequence[float], curves: Dict[str, Sequence[float]],
                  title: str = "P(relERT > t)") -> SvgCanvas:
    """生存曲线 P(relERT > t)；横轴为 log10(t)，纵轴 [0, 1]。"""
    canvas = SvgCanvas(title=title)
    x0, y0, x1, y1 = canvas.plot_box
    t = np.log10(np.maximum(np.asarray(thresholds, dtype=np.float64), 1.0))
    span = float(t.max()) or 1.0
    for s, (name, values) in enumerate(curves.items()):
        points = [(x0 + (x1 - x0) * float(tx) / span, y1 - (y1 - y0) * float(p))
                  for tx, p in zip(t, values)]
        canvas.polyline(points, PALETTE[s % len(PALETTE)])
    for frac in (0.0, 0.5, 1.0):
        y = y1 - (y1 - y0) * frac
        canvas.text(x0 - 8, y + 4, f"{frac:.1f}", anchor="end")
    for e in range(0, int(math.floor(span)) + 1):
        x = x0 + (x1 - x0) * e / span
        canvas.text(x, y1 + 18, f"1e{e}", anchor="middle")
    canvas.axes("t (log scale)", "fraction of datapoints")
    canvas.legend([(name, PALETTE[s % len(PALETTE)]) for s, name in enumerate(curves)])
    return canvas


def frequency_bars(algorithms: Sequence[str], frequencies: Dict[str, Sequence[float]],
                   title: str = "selection frequency") -> SvgCanvas:
    """每个算法一组柱，每个序列一根柱。"""
    canvas = SvgCanvas(title=title)
    x0, y0, x1, y1 = canvas.plot_box
    slot = (x1 - x0) / max(len(algorithms), 1)
    width = 0.8 * slot / max(len(frequencies), 1)
    for s, (name, values) in enumerate(frequencies.items()):
        colour = PALETTE[s % len(PALETTE)]
        for a, value in enumerate(values):
            h = (y1 - y0) * float(value)
            canvas.rect(x0 + a * slot + 0.1 * slot + s * width, y1 - h, width, h, colour)
    for a, name in enumerate(algorithms):
        canvas.text(x0 + (a + 0.5) * slot, y1 + 18, name, size=9, anchor="middle")
    canvas.text(x0 - 8, y0 + 4, "1.0", anchor="end")
    canvas.axes("algorithm", "frequency")
    canvas.legend([(name, PALETTE[s % len(PALETTE)]) for s, name in enumerate(frequencies)])
    return canvas


def _shade(value: float, low: float, high: float) -> str:
    if not np.isfinite(value):
        return "#cccccc"
    frac = 0.0 if high == low else (value - low) / (high - low)
    level = int(round(255 - 200 * min(max(frac, 0.0), 1.0)))
    return f"#{level:02x}{level:02x}ff"


def heatmap(row_labels: Sequence, col_labels: Sequence, grid: np.ndarray,
            title: str = "median relERT", row_name: str = "k", col_name: str = "r") -> SvgCanvas:
    """网格热力图；每格标注数值，NaN 用灰色。"""
    canvas = SvgCanvas(title=title)
    x0, y0, x1, y1 = canvas.plot_box
    grid = np.asarray(grid, dtype=np.float64)
    finite = grid[np.isfinite(grid)]
    low, high = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    cw = (x1 - x0) / max(len(col_labels), 1)
    ch = (y1 - y0) / max(len(row_labels), 1)
    for i, row in enumerate(row_labels):
        for j, col in enumerate(col_labels):
            value = float(grid[i, j])
            canvas.rect(x0 + j * cw, y0 + i * ch, cw, ch, _shade(value, low, high), stroke="#ffffff")
            label = "n/a" if not np.isfinite(value) else f"{value:.3g}"
            canvas.text(x0 + (j + 0.5) * cw, y0 + (i + 0.5) * ch + 4, label, anchor="middle")
        canvas.text(x0 - 8, y0 + (i + 0.5) * ch + 4, str(row), anchor="end")
    for j, col in enumerate(col_labels):
        canvas.text(x0 + (j + 0.5) * cw, y1 + 18, str(col), anchor="middle")
    canvas.axes(col_name, row_name)
    return canvas
