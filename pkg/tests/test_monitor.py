import csv
import numpy as np
from udakit.algorithms import LossRecord
from udakit.monitor import COLUMNS, Monitor, RunLog


def test_monitor_records_and_exports():
    m = Monitor("acc")
    assert m.export("acc") is None
    for v in (0.5, 0.75, 0.8):
        m.record("acc", v)
    x, y = m.export("acc")
    assert x.tolist() == [0, 1, 2]
    assert y.tolist() == [0.5, 0.75, 0.8]
    m.reset()
    assert m.keys() == []


def test_run_log_writes_every_column(tmp_path):
    log = RunLog("DANN_a_to_b_0")
    log.record_step(LossRecord(0, 0, 0.01, 1.25, 0.75, 0.5, 0.0, 1.0, 2))
    log.record_step(LossRecord(1, 0, 0.009, 1.0, 0.6, 0.4, 0.0, 1.0, 1))
    assert len(log) == 2
    path = tmp_path / "log" / "runlog.csv"
    log.write_csv(str(path))
    with open(path, encoding = "utf-8", newline = "") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == COLUMNS == LossRecord.COLUMNS
    assert rows[1] == ["0", "0", "0.01", "1.25", "0.75", "0.5", "0", "1", "2"]
    assert float(rows[2][2]) == 0.009


def test_run_log_plot(tmp_path):
    log = RunLog("plot")
    for step in range(5):
        log.record_step(LossRecord(step, 0, 0.01, float(np.exp(-step)), 0.5, 0.1, 0.0, 1.0, 2))
    path = tmp_path / "losses.png"
    log.plot(str(path))
    assert path.stat().st_size > 0
