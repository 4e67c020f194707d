import csv
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple
from rich.table import Table
from udakit.errors import ConfigError, ParseError
from udakit.algorithms.config import SourceOnlyConfig


"""
结果汇总表：每行是一个算法在一个任务上的平均最佳准确率，以及相对SourceOnly的差值。
"""


REPORT_FORMATS = ("csv", "markdown")
BASELINE = SourceOnlyConfig.method


@dataclass(frozen = True)
class ReportRow:
    algorithm: str
    task: str
    mean: float
    delta: float
    per_seed: Tuple[Optional[float], ...] = ()


@dataclass(frozen = True)
class ReportTable:
    rows: Tuple[ReportRow, ...] = ()
    seeds: Tuple[int, ...] = ()


    @classmethod
    def from_results(cls, results: Sequence) -> "ReportTable":
        """
        由任务结果构造汇总表。均值为各成功种子最佳准确率的平均，差值相对于同一任务上的SourceOnly。
        @params:
            results: Sequence[TaskResult] 任务结果
        @return:
            table: ReportTable 汇总表
        """
        seeds = tuple(s.seed for s in results[0].per_seed) if results else ()
        means: Dict[Tuple[str, str], float] = {}
        partial = []
        for r in results:
            bests = tuple(None if s.failed else s.best for s in r.per_seed)
            ok = [b for b in bests if b is not None]
            mean = float(sum(ok) / len(ok)) if ok else float("nan")
            means[(r.algorithm, r.task)] = mean
            partial.append((r.algorithm, r.task, mean, bests))
        rows = []
        for algorithm, task, mean, bests in partial:
            base = means.get((BASELINE, task), float("nan"))
            rows.append(ReportRow(algorithm, task, mean, mean - base, bests))
        return cls(tuple(rows), seeds)


    def row(self, algorithm: str, task: str) -> ReportRow:
        for r in self.rows:
            if r.algorithm == algorithm and r.task == task:
                return r
        raise KeyError((algorithm, task))


    def rounded(self) -> "ReportTable":
        """
        把所有数值舍入到报表的显示精度（百分数一位小数）。
        """
        def q(v: Optional[float]) -> Optional[float]:
            return None if v is None or math.isnan(v) else round(100.0 * v, 1) / 100.0
        return ReportTable(tuple(ReportRow(r.algorithm, r.task, q(r.mean), q(r.delta), tuple(q(v) for v in r.per_seed)) for r in self.rows), self.seeds)


    def __len__(self) -> int:
        return len(self.rows)


def format_percent(v: Optional[float]) -> str:
    if v is None or math.isnan(v):
        return ""
    return "%.1f" % (100.0 * v,)


def format_delta(v: Optional[float]) -> str:
    """
    差值写作+x.x或-x.x，舍入后为零时写作0.0。
    """
    if v is None or math.isnan(v):
        return ""
    text = "%.1f" % (100.0 * v,)
    if float(text) == 0.0:
        return "0.0"
    return text if text.startswith("-") else "+" + text


def header(table: ReportTable) -> List[str]:
    return ["algorithm", "task", "mean", "delta"] + ["seed_%d" % (s,) for s in table.seeds]


def csv_rows(table: ReportTable) -> List[List[str]]:
    return [[r.algorithm, r.task, format_percent(r.mean), format_delta(r.delta)] + [format_percent(v) for v in r.per_seed] for r in table.rows]


def markdown_lines(table: ReportTable) -> List[str]:
    cols = ["algorithm", "task", "mean (delta)"] + ["seed %d" % (s,) for s in table.seeds]
    lines = ["| " + " | ".join(cols) + " |", "|" + "|".join(["---"] * len(cols)) + "|"]
    for r in table.rows:
        cell = "%s (%s)" % (format_percent(r.mean), format_delta(r.delta))
        lines.append("| " + " | ".join([r.algorithm, r.task, cell] + [format_percent(v) for v in r.per_seed]) + " |")
    return lines


def emit_report(table: ReportTable, path: str, fmt: str = "csv") -> None:
    """
    写出汇总表。列顺序固定为algorithm, task, mean, delta, 各种子；准确率以一位小数的百分数表示。
    @params:
        table: ReportTable 汇总表
        path: str 文件路径
        fmt: str csv或markdown
    """
    if fmt not in REPORT_FORMATS:
        raise ConfigError("Unknown report format '%s', expected one of %s." % (fmt, list(REPORT_FORMATS)))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok = True)
    with open(path, "w", encoding = "utf-8", newline = "") as f:
        if fmt == "csv":
            writer = csv.writer(f, lineterminator = "\n")
            writer.writerow(header(table))
            writer.writerows(csv_rows(table))
        else:
            f.write("\n".join(markdown_lines(table)) + "\n")


def parse_value(text: str, row: int, column: str) -> Optional[float]:
    if text == "":
        return None
    try:
        return float(text) / 100.0
    except ValueError:
        raise ParseError("Row %d, column '%s': '%s' is not a number." % (row, column, text), row, column) from None


def parse_report_csv(path: str) -> ReportTable:
    """
    读回emit_report写出的CSV。数值为显示精度下的值。
    """
    with open(path, "r", encoding = "utf-8", newline = "") as f:
        lines = list(csv.reader(f))
    if not lines or lines[0][:4] != ["algorithm", "task", "mean", "delta"]:
        raise ParseError("'%s' does not start with a report header." % (path,), 1)
    head = lines[0]
    try:
        seeds = tuple(int(c[len("seed_"):]) for c in head[4:])
    except ValueError:
        raise ParseError("Malformed seed columns in '%s'." % (path,), 1) from None
    rows = []
    for i, cells in enumerate(lines[1:], start = 2):
        if len(cells) != len(head):
            raise ParseError("Row %d has %d cells, expected %d." % (i, len(cells), len(head)), i)
        mean = parse_value(cells[2], i, "mean")
        delta = parse_value(cells[3], i, "delta")
        rows.append(ReportRow(cells[0], cells[1], mean, delta, tuple(parse_value(c, i, h) for c, h in zip(cells[4:], head[4:]))))
    return ReportTable(tuple(rows), seeds)


def console_table(table: ReportTable, title: str = "Target accuracy (%)") -> Table:
    """
    用于终端输出的rich表格。
    """
    t = Table(title = title)
    t.add_column("algorithm")
    t.add_column("task")
    t.add_column("mean", justify = "right")
    t.add_column("delta", justify = "right")
    for s in table.seeds:
        t.add_column("seed %d" % (s,), justify = "right")
    for r in table.rows:
        delta = format_delta(r.delta)
        style = "green" if delta.startswith("+") else ("red" if delta.startswith("-") else "")
        t.add_row(r.algorithm, r.task, format_percent(r.mean), "[%s]%s[/%s]" % (style, delta, style) if style else delta, *[format_percent(v) for v in r.per_seed])
    return t
