"""Panel data model and CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError

MISSING_TOKENS = frozenset({"", "NA"})


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Panel:
    """Unit-by-time outcome matrix.

    ``values`` is M x T (units by periods); ``mask`` marks observed cells.
    ``treated`` and ``t0`` stay ``None`` until the caller designates them with
    :meth:`with_design`. ``t0`` counts pre-intervention periods, so the
    pre-period is ``values[:, :t0]``.
    """

    values: np.ndarray
    mask: np.ndarray
    unit_labels: tuple[str, ...]
    time_labels: np.ndarray
    treated: int | None = None
    t0: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or mask.shape != values.shape:
            raise ValidationError(
                f"values {values.shape} and mask {mask.shape} must be matching 2-d arrays"
            )
        values = np.where(mask, values, np.nan)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "unit_labels", tuple(str(u) for u in self.unit_labels))
        object.__setattr__(self, "time_labels", _frozen(np.asarray(self.time_labels, dtype=float)))
        if len(self.unit_labels) != values.shape[0]:
            raise ValidationError("unit_labels length does not match number of rows")
        if len(self.time_labels) != values.shape[1]:
            raise ValidationError("time_labels length does not match number of columns")

    @property
    def n_units(self) -> int:
        return self.values.shape[0]

    @property
    def n_periods(self) -> int:
        return self.values.shape[1]

    def unit_index(self, label: str) -> int:
        try:
            return self.unit_labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown unit {label!r}") from None

    def time_index(self, label: float) -> int:
        hits = np.flatnonzero(np.isclose(self.time_labels, float(label), rtol=0, atol=1e-9))
        if hits.size == 0:
            raise ValidationError(f"unknown time label {label!r}")
        return int(hits[0])

    def with_design(self, treated: int | str, t0: int) -> Panel:
        if isinstance(treated, str):
            treated = self.unit_index(treated)
        return Panel(self.values, self.mask, self.unit_labels, self.time_labels, int(treated), int(t0))

    def with_intervention_at(self, treated: int | str, time_label: float) -> Panel:
        """Designate the treated unit and intervention by time label.

        The labelled period is the last pre-intervention period.
        """
        return self.with_design(treated, self.time_index(time_label) + 1)

    def subset_units(self, keep: Sequence[int], treated: int | None = None) -> Panel:
        keep = list(keep)
        return Panel(
            self.values[keep],
            self.mask[keep],
            [self.unit_labels[i] for i in keep],
            self.time_labels,
            treated,
            self.t0,
        )

    def truncate(self, n_periods: int) -> Panel:
        t0 = None if self.t0 is None else min(self.t0, n_periods)
        return Panel(
            self.values[:, :n_periods],
            self.mask[:, :n_periods],
            self.unit_labels,
            self.time_labels[:n_periods],
            self.treated,
            t0,
        )

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.mask, self.values, fill)

    def equals(self, other: Panel) -> bool:
        return (
            self.unit_labels == other.unit_labels
            and np.array_equal(self.time_labels, other.time_labels)
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.filled(), other.filled())
            and self.treated == other.treated
            and self.t0 == other.t0
        )


@dataclass
class ValidationReport:
    ok: bool
    missing_per_unit: dict[str, int]
    n_pre: int | None
    n_post: int | None
    violations: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        head = "PASS" if self.ok else "FAIL"
        lines = [f"{head}: pre={self.n_pre} post={self.n_post}"]
        lines += [f"  - {v}" for v in self.violations]
        return "\n".join(lines)


def validate(panel: Panel) -> ValidationReport:
    """Check every panel invariant and report all violations at once."""
    violations = []
    m, t = panel.values.shape
    if m < 2:
        violations.append(f"need at least 2 units, got {m}")
    if t < 2:
        violations.append(f"need at least 2 periods, got {t}")
    if np.any(np.diff(panel.time_labels) <= 0):
        violations.append("time labels are not strictly increasing")
    if np.any(~np.isfinite(panel.values[panel.mask])):
        violations.append("non-finite observed values")

    t0 = panel.t0
    n_pre = n_post = None
    if t0 is None:
        violations.append("intervention index t0 is not set")
    elif t0 < 1:
        violations.append(f"t0={t0}: no pre-intervention period")
    elif t0 >= t:
        violations.append(f"t0={t0}: no post-intervention period")
    else:
        n_pre, n_post = t0, t - t0

    if panel.treated is None:
        violations.append("treated unit is not set")
    elif not 0 <= panel.treated < m:
        violations.append(f"treated index {panel.treated} out of range 0..{m - 1}")

    if t0 is not None and t0 >= 1:
        pre_obs = panel.mask[:, :t0].sum(axis=1)
        for label, n in zip(panel.unit_labels, pre_obs):
            if n < 2:
                violations.append(f"unit {label!r} has {n} observed pre-intervention entries (need >= 2)")

    missing = {u: int(n) for u, n in zip(panel.unit_labels, (~panel.mask).sum(axis=1))}
    return ValidationReport(not violations, missing, n_pre, n_post, violations)


def require_valid(panel: Panel) -> None:
    report = validate(panel)
    if not report.ok:
        raise ValidationError("; ".join(report.violations))


def is_regular(times: np.ndarray, rtol: float = 1e-9) -> bool:
    d = np.diff(np.asarray(times, dtype=float))
    return d.size == 0 or bool(np.allclose(d, d[0], rtol=rtol, atol=0))


def _parse_float(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ValidationError(f"cannot parse {token!r} as a number at {where}") from None


def _parse_cell(token: str, where: str) -> float | None:
    token = token.strip()
    if token in MISSING_TOKENS:
        return None
    return _parse_float(token, where)


def load_panel(path: str | Path, layout: str = "wide") -> Panel:
    """Read a panel from CSV.

    ``wide``: header ``unit,<t1>,<t2>,...`` then one row per unit; empty or
    ``NA`` cells are missing. ``long``: rows ``unit,time,value`` (an optional
    header row is skipped); absent (unit, time) pairs are missing.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    if layout == "wide":
        return _load_wide(rows, path)
    if layout == "long":
        return _load_long(rows, path)
    raise ValidationError(f"unknown layout {layout!r} (expected 'wide' or 'long')")


def _load_wide(rows: list[list[str]], path: Path) -> Panel:
    header = rows[0]
    times = np.array(
        [_parse_float(h.strip(), f"{path}: header column {j + 1}") for j, h in enumerate(header[1:], start=1)]
    )
    if len(np.unique(times)) != len(times):
        raise ValidationError(f"{path}: duplicate time labels in header")
    order = np.argsort(times, kind="stable")
    units, values, mask = [], [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValidationError(f"{path}: ragged row {i} has {len(row)} cells, header has {len(header)}")
        units.append(row[0].strip())
        cells = [_parse_cell(c, f"{path}: row {i}, column {j}") for j, c in enumerate(row[1:], start=2)]
        values.append([np.nan if c is None else c for c in cells])
        mask.append([c is not None for c in cells])
    if len(set(units)) != len(units):
        raise ValidationError(f"{path}: duplicate unit labels")
    values = np.array(values, dtype=float).reshape(len(units), len(times))[:, order]
    mask = np.array(mask, dtype=bool).reshape(len(units), len(times))[:, order]
    return Panel(values, mask, units, times[order])


def _load_long(rows: list[list[str]], path: Path) -> Panel:
    first = 1
    if len(rows[0]) > 1 and rows[0][1].strip().lower() == "time":
        rows, first = rows[1:], 2
    triples = {}
    units: list[str] = []
    for i, row in enumerate(rows, start=first):
        if len(row) != 3:
            raise ValidationError(f"{path}: row {i} has {len(row)} cells, expected 3")
        unit = row[0].strip()
        time = _parse_float(row[1].strip(), f"{path}: row {i}, column 2")
        value = _parse_cell(row[2], f"{path}: row {i}, column 3")
        if (unit, time) in triples:
            raise ValidationError(f"{path}: duplicate entry for ({unit}, {row[1].strip()}) at row {i}")
        triples[unit, time] = value
        if unit not in units:
            units.append(unit)
    times = np.array(sorted({t for _, t in triples}))
    col = {t: j for j, t in enumerate(times)}
    values = np.full((len(units), len(times)), np.nan)
    mask = np.zeros(values.shape, dtype=bool)
    row_of = {u: i for i, u in enumerate(units)}
    for (u, t), v in triples.items():
        if v is not None:
            values[row_of[u], col[t]] = v
            mask[row_of[u], col[t]] = True
    return Panel(values, mask, units, times)


def format_time(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def write_wide(panel: Panel, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit"] + [format_time(t) for t in panel.time_labels])
        for label, row, m in zip(panel.unit_labels, panel.values, panel.mask):
            w.writerow([label] + [repr(float(v)) if ok else "" for v, ok in zip(row, m)])


def write_long(panel: Panel, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "time", "value"])
        for label, row, m in zip(panel.unit_labels, panel.values, panel.mask):
            for t, v, ok in zip(panel.time_labels, row, m):
                w.writerow([label, format_time(t), repr(float(v)) if ok else ""])
