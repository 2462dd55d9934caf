"""Per-iteration solver records and their CSV form."""

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = ["Status", "TraceRecord", "SolverTrace", "write_trace", "read_trace", "TRACE_COLUMNS"]

TRACE_COLUMNS = ("iter", "a_calls", "objective", "subgrad_norm", "seconds")


class Status(str, Enum):
    CONVERGED = "Converged"
    ITER_BUDGET = "IterBudget"
    OP_BUDGET = "OpBudget"


@dataclass
class TraceRecord:
    k: int
    a_calls: int
    objective: float
    subgrad_norm: float
    seconds: float
    residual: float | None = None


@dataclass
class SolverTrace:
    solver: str
    records: list = field(default_factory=list)
    status: Status | None = None
    meta: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def append(self, record):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    @property
    def final(self):
        return self.records[-1]

    @property
    def iterations(self):
        return self.records[-1].k if self.records else 0

    @property
    def a_calls(self):
        return self.records[-1].a_calls if self.records else 0

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def objectives(self):
        return self.column("objective")

    @property
    def has_residual(self):
        return bool(self.records) and self.records[0].residual is not None

    def summary(self):
        """``solver, status, iters, a_calls, final_F, final_subgrad``."""
        r = self.final
        status = self.status.value if self.status else "None"
        return f"{self.solver}, {status}, {r.k}, {r.a_calls}, {r.objective:.17g}, {r.subgrad_norm:.17g}"


def _fmt(v):
    return format(float(v), ".17g")


def write_trace(trace, path, timing=True):
    """Write comment-line metadata, then the header row and one row per iteration.

    Only scalar metadata is written. With ``timing=False`` the seconds
    column is zeroed so reruns give byte-identical files. The file is
    written to a temporary name and renamed into place.
    """
    buf = io.StringIO()
    buf.write(f"# solver={trace.solver}\n")
    if trace.status is not None:
        buf.write(f"# status={trace.status.value}\n")
    for key in sorted(trace.meta):
        if not isinstance(trace.meta[key], (str, int, float, bool)):
            continue
        buf.write(f"# {key}={trace.meta[key]}\n")
    cols = list(TRACE_COLUMNS) + (["residual"] if trace.has_residual else [])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in trace.records:
        row = [str(r.k), str(r.a_calls), _fmt(r.objective), _fmt(r.subgrad_norm), _fmt(r.seconds if timing else 0.0)]
        if trace.has_residual:
            row.append(_fmt(r.residual))
        w.writerow(row)
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".trace-", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)
    return path


def read_trace(path):
    meta = {}
    lines = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line.strip():
                lines.append(line)
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    with_res = "residual" in header
    trace = SolverTrace(meta.pop("solver", "unknown"))
    status = meta.pop("status", None)
    trace.status = Status(status) if status else None
    trace.meta = meta
    for row in body:
        trace.append(
            TraceRecord(
                int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[4]),
                float(row[5]) if with_res else None,
            )
        )
    return trace
