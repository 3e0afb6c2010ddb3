"""Result records, tables and CSV round-trips.

A report captures one before/after clustering comparison.  Rendering is
fully deterministic so identical experiments produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields

import numpy as np

_FLOAT_FIELDS = ("baseline_acc", "baseline_nmi", "post_acc", "post_nmi",
                 "acc_delta", "nmi_delta")
_INT_FIELDS = ("n_sources", "k", "restarts", "seed")


@dataclass
class EvalReport:
    """Clustering quality on the latent space before and after transfer."""

    label: str
    baseline_acc: float
    baseline_nmi: float
    post_acc: float
    post_nmi: float
    acc_delta: float
    nmi_delta: float
    n_sources: int
    k: int
    restarts: int
    seed: int
    fingerprint: str

    def __post_init__(self):
        for name in ("baseline_acc", "baseline_nmi", "post_acc", "post_nmi"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.acc_delta != self.post_acc - self.baseline_acc:
            raise ValueError("acc_delta is not post minus baseline")
        if self.nmi_delta != self.post_nmi - self.baseline_nmi:
            raise ValueError("nmi_delta is not post minus baseline")


def _header() -> list[str]:
    return [f.name for f in fields(EvalReport)]


def write_csv(reports: list[EvalReport], path=None) -> str:
    """Serialise reports to CSV; returns the text, optionally writing it.

    Floats are stored via repr so a read back is value-exact.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_header())
    for r in reports:
        writer.writerow([repr(getattr(r, name)) if name in _FLOAT_FIELDS
                         else getattr(r, name) for name in _header()])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(source) -> list[EvalReport]:
    """Parse reports from a path or a CSV string."""
    if isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source) as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != _header():
        raise ValueError("unrecognised report header")
    out = []
    for row in rows[1:]:
        kwargs = {}
        for name, value in zip(_header(), row):
            if name in _FLOAT_FIELDS:
                kwargs[name] = float(value)
            elif name in _INT_FIELDS:
                kwargs[name] = int(value)
            else:
                kwargs[name] = value
        out.append(EvalReport(**kwargs))
    return out


def _cell(score: float, delta: float | None) -> str:
    if delta is None:
        return f"{100 * score:.2f}"
    return f"{100 * score:.2f} ({100 * delta:+.2f})"


def render_table(reports: list[EvalReport], title: str | None = None) -> str:
    """Fixed-width text table, scores in percent with signed deltas."""
    if not reports:
        raise ValueError("nothing to render")
    rows = [("configuration", "ACC", "NMI")]
    base = reports[0]
    rows.append(("baseline (no evidence)",
                 _cell(base.baseline_acc, None), _cell(base.baseline_nmi, None)))
    for r in reports:
        rows.append((r.label, _cell(r.post_acc, r.acc_delta),
                     _cell(r.post_nmi, r.nmi_delta)))
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = []
    if title:
        lines.append(title)
    for i, row in enumerate(rows):
        lines.append("  ".join(col.ljust(w) for col, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


@dataclass
class AggregateRow:
    label: str
    runs: int
    post_acc_mean: float
    post_acc_std: float
    post_nmi_mean: float
    post_nmi_std: float
    acc_delta_mean: float
    nmi_delta_mean: float


def aggregate(reports: list[EvalReport]) -> list[AggregateRow]:
    """Group repeated configurations by label, first-seen order preserved."""
    groups: dict[str, list[EvalReport]] = {}
    for r in reports:
        groups.setdefault(r.label, []).append(r)
    out = []
    for label, rs in groups.items():
        acc = np.array([r.post_acc for r in rs], dtype=np.float64)
        nmi = np.array([r.post_nmi for r in rs], dtype=np.float64)
        out.append(AggregateRow(
            label, len(rs),
            float(acc.mean()), float(acc.std(ddof=1)) if len(rs) > 1 else 0.0,
            float(nmi.mean()), float(nmi.std(ddof=1)) if len(rs) > 1 else 0.0,
            float(np.mean([r.acc_delta for r in rs])),
            float(np.mean([r.nmi_delta for r in rs])),
        ))
    return out


def render_aggregate(rows: list[AggregateRow], title: str | None = None) -> str:
    if not rows:
        raise ValueError("nothing to render")
    table = [("configuration", "runs", "ACC", "NMI")]
    for r in rows:
        table.append((
            r.label, str(r.runs),
            f"{100 * r.post_acc_mean:.2f} +- {100 * r.post_acc_std:.2f}",
            f"{100 * r.post_nmi_mean:.2f} +- {100 * r.post_nmi_std:.2f}",
        ))
    widths = [max(len(row[i]) for row in table) for i in range(4)]
    lines = []
    if title:
        lines.append(title)
    for i, row in enumerate(table):
        lines.append("  ".join(col.ljust(w) for col, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
