import os

import pytest

from src.core.errors import ReportWriteError

from src.core.model import RatePoint, SystemParams
from src.services.region_service import BoundaryTrace, SubregionId
from src.services.slotted_simulator import SlotOutcome
from src.services.stability_harness import RegionReport, RegionRow, StabilityTag, StabilityVerdict
from src.ui.report_writer import (SlotTraceWriter, format_bool, format_number,
                                  render_boundary_trace, render_region_report,
                                  render_uniform_rows, write_atomic)

def test_formatting():
    assert format_number(0.07) == "0.070000000"
    assert format_number(None) == ""
    assert format_bool(True) == "true"
    assert format_bool(False) == "false"
    assert format_bool(None) == ""

def test_boundary_trace_csv():
    trace = BoundaryTrace(
        points=(RatePoint(0.0, 0.24), RatePoint(0.2, 0.0)),
        segment_labels=(SubregionId.R221, None),
        pa_star_values=(0.0, None),
    )
    assert render_boundary_trace(trace) == (
        "lambda1,lambda2_boundary,segment,pa_star\n"
        "0.000000000,0.240000000,R221,0.000000000\n"
        "0.200000000,0.000000000,,\n"
    )

def test_region_report_csv():
    verdict = StabilityVerdict(StabilityTag.STABLE, 1e-6, -2e-6, 0.05)
    report = RegionReport("closure", (
        RegionRow(RatePoint(0.05, 0.05), True, 0.05, 0.0, verdict),
        RegionRow(RatePoint(0.2, 0.2), False, -0.1, 1.0),
    ))
    lines = render_region_report(report).splitlines()
    assert lines[0] == "lambda1,lambda2,analytic_inside,analytic_margin,pa_used,verdict,drift_q1,drift_q2,agree"
    assert lines[1] == "0.050000000,0.050000000,true,0.050000000,0.000000000,STABLE,0.000001000,-0.000002000,true"
    assert lines[2] == "0.200000000,0.200000000,false,-0.100000000,1.000000000,,,,"

def test_write_atomic(temp_dir):
    path = os.path.join(temp_dir, "out", "report.csv")
    write_atomic(path, "a,b\n1,2\n")
    write_atomic(path, "a,b\n3,4\n")
    with open(path, newline="") as f:
        assert f.read() == "a,b\n3,4\n"
    assert os.listdir(os.path.dirname(path)) == ["report.csv"]

def test_slot_trace_writer(temp_dir):
    path = os.path.join(temp_dir, "trace.csv")
    outcome = SlotOutcome(True, False, False, True, False, False, True, False, False, False)
    with SlotTraceWriter(path) as trace:
        trace.record(0, outcome)
        assert not os.path.exists(path)
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0].startswith("slot,s_transmitted,r_transmitted,collision")
    assert lines[1] == "0,true,false,false,true,false,false,true,false,false,false"

def test_slot_trace_writer_discards_on_error(temp_dir):
    path = os.path.join(temp_dir, "trace.csv")
    with pytest.raises(RuntimeError):
        with SlotTraceWriter(path):
            raise RuntimeError("interrupted")
    assert os.listdir(temp_dir) == []

def test_uniform_rows_keep_full_precision():
    text = render_uniform_rows([[0.5118216247002567, 0.1, 0.0, 0.25, 0.5, 0.75, 1e-05, 0.999]])
    lines = text.splitlines()
    assert lines[0] == "slot,u0,u1,u2,u3,u4,u5,u6,u7"
    assert lines[1] == "0,0.5118216247002567,0.1,0.0,0.25,0.5,0.75,1e-05,0.999"

def test_unwritable_path_is_a_report_error(temp_dir):
    blocker = os.path.join(temp_dir, "blocker")
    with open(blocker, "w") as f:
        f.write("not a directory")
    with pytest.raises(ReportWriteError, match="cannot write"):
        write_atomic(os.path.join(blocker, "report.csv"), "a\n")
    with pytest.raises(ReportWriteError):
        with SlotTraceWriter(os.path.join(blocker, "trace.csv")):
            pass
    assert os.listdir(temp_dir) == ["blocker"]
