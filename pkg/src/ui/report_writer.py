"""
Report Writer Module.

CSV serialization of boundary traces, region reports, per-slot traces and
reference uniforms. Report numbers use fixed 9-decimal formatting and
booleans are written as true/false, so identical inputs give byte-identical
files. Files are written to a temporary sibling and renamed into place.
"""

import csv
import io
import logging
import os
import tempfile
from typing import Iterable, List, Optional, Sequence, TextIO

from src.core.errors import ReportWriteError
from src.services.region_service import BoundaryTrace
from src.services.rng import DRAWS_PER_SLOT
from src.services.slotted_simulator import SlotOutcome
from src.services.stability_harness import RegionReport

logger = logging.getLogger(__name__)

BOUNDARY_COLUMNS = ("lambda1", "lambda2_boundary", "segment", "pa_star")
REGION_COLUMNS = ("lambda1", "lambda2", "analytic_inside", "analytic_margin", "pa_used",
                  "verdict", "drift_q1", "drift_q2", "agree")
TRACE_COLUMNS = ("slot",) + SlotOutcome.FIELDS
UNIFORM_COLUMNS = ("slot",) + tuple(f"u{i}" for i in range(DRAWS_PER_SLOT))


def format_number(value: Optional[float]) -> str:
    return "" if value is None else "%.9f" % value


def format_bool(value: Optional[bool]) -> str:
    if value is None:
        return ""
    return "true" if value else "false"


def _writer(stream: TextIO):
    return csv.writer(stream, lineterminator="\n")


def _render(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = _writer(buffer)
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def boundary_trace_rows(trace: BoundaryTrace) -> List[List[str]]:
    rows = []
    for point, label, pa in zip(trace.points, trace.segment_labels, trace.pa_star_values):
        rows.append([
            format_number(point.lambda1),
            format_number(point.lambda2),
            label.value if label is not None else "",
            format_number(pa),
        ])
    return rows


def region_report_rows(report: RegionReport) -> List[List[str]]:
    rows = []
    for row in report.rows:
        verdict = row.sim_verdict
        rows.append([
            format_number(row.point.lambda1),
            format_number(row.point.lambda2),
            format_bool(row.analytic_inside),
            format_number(row.analytic_margin),
            format_number(row.pa_used),
            verdict.tag.value if verdict is not None else "",
            format_number(verdict.drift_q1) if verdict is not None else "",
            format_number(verdict.drift_q2) if verdict is not None else "",
            format_bool(row.agree),
        ])
    return rows


def render_boundary_trace(trace: BoundaryTrace) -> str:
    return _render(BOUNDARY_COLUMNS, boundary_trace_rows(trace))


def render_region_report(report: RegionReport) -> str:
    return _render(REGION_COLUMNS, region_report_rows(report))


def render_uniform_rows(rows: Sequence[Sequence[float]]) -> str:
    """Per-slot uniforms at full precision; parsing a field gives back the exact double."""
    return _render(UNIFORM_COLUMNS,
                   ([str(slot)] + [repr(u) for u in row] for slot, row in enumerate(rows)))


def write_atomic(path: str, text: str):
    """
    Writes `text` to `path` through a temporary file in the same directory.

    Readers either see the previous file or the complete new one.

    Raises:
        ReportWriteError: If the directory or file cannot be written.
    """
    try:
        fd, tmp_path = _open_sibling(path)
    except OSError as e:
        raise ReportWriteError(f"cannot write {path}: {e}") from e
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException as e:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        if isinstance(e, OSError):
            raise ReportWriteError(f"cannot write {path}: {e}") from e
        raise
    logger.info("wrote %s", path)


def _open_sibling(path: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    return tempfile.mkstemp(prefix=".tmp-", dir=directory)


class SlotTraceWriter:
    """
    Streams one CSV record per slot (slot index plus the outcome flags).

    Use as a context manager; the file only appears under its final name
    once the writer closes without error.

    Example:
        with SlotTraceWriter("trace.csv") as trace:
            run(config, on_slot=trace.record)
    """

    def __init__(self, path: str):
        self.path = path
        self._tmp_path = None
        self._file = None
        self._writer = None

    def __enter__(self) -> "SlotTraceWriter":
        try:
            fd, self._tmp_path = _open_sibling(self.path)
        except OSError as e:
            raise ReportWriteError(f"cannot write {self.path}: {e}") from e
        self._file = os.fdopen(fd, "w", newline="", encoding="utf-8")
        self._writer = _writer(self._file)
        self._writer.writerow(TRACE_COLUMNS)
        return self

    def record(self, slot: int, outcome: SlotOutcome):
        self._writer.writerow([str(slot)] + [format_bool(v) for v in outcome.as_tuple()])

    def __exit__(self, exc_type, exc, tb):
        self._file.close()
        if exc_type is None:
            try:
                os.replace(self._tmp_path, self.path)
            except OSError as e:
                os.remove(self._tmp_path)
                raise ReportWriteError(f"cannot write {self.path}: {e}") from e
            logger.info("wrote %s", self.path)
        elif os.path.exists(self._tmp_path):
            os.remove(self._tmp_path)
        return False
