"""Experiment rows and the results CSV.

The CSV layout is fixed: one row per (dataset, C, norm, strategy), columns
dataset,C,norm,strategy,m_improvement,t_cluster,t_strategy,t_total,gap,
objective,status, numbers rendered with %.6g. Rows are written sorted by
(dataset, C, strategy) so reruns diff cleanly.
"""

import csv
import warnings
from dataclasses import dataclass, fields

HEADER = ["dataset", "C", "norm", "strategy", "m_improvement", "t_cluster",
          "t_strategy", "t_total", "gap", "objective", "status"]

_FLOATS = ("C", "m_improvement", "t_cluster", "t_strategy", "t_total",
           "gap", "objective")


@dataclass
class ExperimentRow:
    dataset: str
    C: float
    norm: str
    strategy: str
    m_improvement: float
    t_cluster: float
    t_strategy: float
    t_total: float
    gap: float
    objective: float
    status: str

    def key(self):
        return (self.dataset, self.C, self.norm, self.strategy)


def m_improvement(M_initial, M_final):
    """Average relative reduction of the per-instance M values.

    Entries whose initial value is zero cannot be scored and are dropped
    from the average (with a warning); the mean runs over the kept entries.
    """
    total = 0.0
    kept = 0
    skipped = 0
    for before, after in zip(M_initial, M_final):
        if before == 0.0:
            skipped += 1
            continue
        total += (before - after) / before
        kept += 1
    if skipped:
        warnings.warn(f"m_improvement skipped {skipped} zero-initial entries")
    return total / kept if kept else 0.0


def _render(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "%.6g" % value
    return str(value)


def write_results(rows, path):
    seen = {}
    for row in rows:
        if row.key() in seen:
            raise ValueError(f"duplicate result row for {row.key()}")
        if row.t_total is not None and row.t_total < row.t_strategy:
            raise ValueError(
                f"t_total < t_strategy on {row.key()}: "
                f"{row.t_total} < {row.t_strategy}")
        seen[row.key()] = row
    ordered = sorted(rows, key=lambda r: (r.dataset, r.C, r.strategy, r.norm))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(HEADER)
        for row in ordered:
            out.writerow([_render(getattr(row, name)) for name in HEADER])


def read_results(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        for rec in reader:
            kwargs = {}
            for f in fields(ExperimentRow):
                raw = rec[f.name]
                if f.name in _FLOATS:
                    kwargs[f.name] = float(raw) if raw != "" else None
                else:
                    kwargs[f.name] = raw
            rows.append(ExperimentRow(**kwargs))
    return rows
