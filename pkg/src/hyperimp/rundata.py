"""Loading, validation, and filtering of per-dataset performance records.

Runs files are CSV with header ``dataset_id,y,<hyperparameter names in space
order>`` or JSON-lines (one ``{"dataset_id":..,"y":..,"config":{..}}`` object
per line) when the path ends in ``.jsonl``.  Performance ``y`` is always
higher-is-better; metrics where lower is better must be negated on export.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .configspace import CATEGORICAL, INTEGER
from .errors import EmptyCollection, MissingColumn, OutOfDomain, ParseError

CONSTANT_TOL = 1e-12


@dataclass(frozen=True)
class RunRecord:
    dataset_id: str
    config: dict
    y: float


@dataclass(frozen=True)
class DatasetRuns:
    """All performance records observed for one dataset."""

    dataset_id: str
    records: tuple[RunRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise EmptyCollection(f"dataset {self.dataset_id!r} has no records")
        bad = [r for r in self.records if r.dataset_id != self.dataset_id]
        if bad:
            raise ParseError(f"record with dataset_id {bad[0].dataset_id!r} in {self.dataset_id!r}")

    def __len__(self):
        return len(self.records)

    @property
    def ys(self):
        return np.array([r.y for r in self.records], dtype=np.float64)

    @property
    def configs(self):
        return [r.config for r in self.records]


@dataclass(frozen=True)
class RunCollection:
    """Immutable mapping of dataset_id -> DatasetRuns."""

    datasets: dict

    def __post_init__(self):
        object.__setattr__(self, "datasets", dict(self.datasets))

    def __len__(self):
        return len(self.datasets)

    def __getitem__(self, dataset_id):
        return self.datasets[dataset_id]

    def __contains__(self, dataset_id):
        return dataset_id in self.datasets

    @property
    def ids(self):
        """Dataset ids in canonical (sorted) order."""
        return sorted(self.datasets)


@dataclass(frozen=True)
class FilterReport:
    """Which datasets a filtering pass removed, and why."""

    removed: tuple = ()
    kept: tuple = ()

    def reasons(self):
        return dict(self.removed)


def _parse_value(spec, raw, row_no):
    name = spec.name
    if spec.kind == CATEGORICAL:
        if raw not in spec.categories:
            raise OutOfDomain(
                f"row {row_no}, column {name!r}: unknown category {raw!r}, "
                f"expected one of {spec.categories}"
            )
        return raw
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise ParseError(f"row {row_no}, column {name!r}: not a number: {raw!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"row {row_no}, column {name!r}: non-finite value {raw!r}")
    if v < spec.lo or v > spec.hi:
        raise OutOfDomain(f"row {row_no}, column {name!r}: {v} outside [{spec.lo}, {spec.hi}]")
    if spec.kind == INTEGER:
        if abs(v - round(v)) > 1e-9:
            raise OutOfDomain(f"row {row_no}, column {name!r}: {v} is not a whole number")
        return int(round(v))
    return v


def _parse_y(raw, row_no):
    try:
        y = float(raw)
    except (TypeError, ValueError):
        raise ParseError(f"row {row_no}, column 'y': not a number: {raw!r}") from None
    if not math.isfinite(y):
        raise ParseError(f"row {row_no}, column 'y': non-finite value {raw!r}")
    return y


def _collect(records):
    grouped = {}
    for r in records:
        grouped.setdefault(r.dataset_id, []).append(r)
    return RunCollection({d: DatasetRuns(d, rs) for d, rs in grouped.items()})


def _load_csv(path, space):
    expected = ["dataset_id", "y", *space.names]
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header != expected:
            missing = [c for c in expected if c not in header]
            if missing:
                raise MissingColumn(f"{path}: header missing columns {missing}")
            raise MissingColumn(f"{path}: header {header} != expected {expected}")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise ParseError(
                    f"{path}: row {row_no}: expected {len(expected)} fields, got {len(row)}"
                )
            y = _parse_y(row[1], row_no)
            config = {
                spec.name: _parse_value(spec, row[2 + i], row_no)
                for i, spec in enumerate(space.specs)
            }
            records.append(RunRecord(row[0], config, y))
    return records


def _load_jsonl(path, space):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}: row {row_no}: {e.msg}") from None
            for key in ("dataset_id", "y", "config"):
                if key not in obj:
                    raise ParseError(f"{path}: row {row_no}: missing {key!r}")
            raw_cfg = obj["config"]
            missing = [n for n in space.names if n not in raw_cfg]
            if missing:
                raise MissingColumn(f"{path}: row {row_no}: config missing {missing}")
            y = _parse_y(obj["y"], row_no)
            config = {s.name: _parse_value(s, raw_cfg[s.name], row_no) for s in space.specs}
            records.append(RunRecord(str(obj["dataset_id"]), config, y))
    return records


def load_runs(path, space):
    """Load a runs file into a RunCollection, validating against the space."""
    path = str(path)
    records = _load_jsonl(path, space) if path.endswith(".jsonl") else _load_csv(path, space)
    if not records:
        raise EmptyCollection(f"{path}: no records")
    return _collect(records)


def save_runs(rc, space, path):
    """Write a RunCollection back out (CSV or .jsonl, by extension)."""
    path = str(path)
    ids = rc.ids
    if path.endswith(".jsonl"):
        with open(path, "w", encoding="utf-8") as fh:
            for d in ids:
                for r in rc[d].records:
                    cfg = {n: r.config[n] for n in space.names}
                    fh.write(
                        json.dumps(
                            {"dataset_id": r.dataset_id, "y": r.y, "config": cfg},
                            sort_keys=False,
                        )
                    )
                    fh.write("\n")
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset_id", "y", *space.names])
        for d in ids:
            for r in rc[d].records:
                writer.writerow([r.dataset_id, repr(r.y)] + [_fmt(r.config[n]) for n in space.names])


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def filter_datasets(rc, min_runs=150, drop_constant=True):
    """Drop datasets with too few runs or constant performance.

    Returns the surviving collection and a report naming each removal.
    Idempotent: filtering an already-filtered collection changes nothing.
    """
    removed = []
    kept = {}
    for d in rc.ids:
        runs = rc[d]
        if len(runs) < min_runs:
            removed.append((d, "below min_runs"))
            continue
        if drop_constant:
            ys = runs.ys
            if float(np.max(ys) - np.min(ys)) <= CONSTANT_TOL:
                removed.append((d, "constant performance"))
                continue
        kept[d] = runs
    if not kept:
        raise EmptyCollection(
            f"no datasets survived filtering ({len(removed)} removed)"
        )
    return RunCollection(kept), FilterReport(tuple(removed), tuple(sorted(kept)))


def top_n_configs(runs, n=10):
    """The configurations of the ``n`` best records, ties kept in input order."""
    if n < 1:
        raise OutOfDomain(f"n must be >= 1, got {n}")
    order = sorted(range(len(runs.records)), key=lambda i: -runs.records[i].y)
    return [runs.records[i].config for i in order[:n]]
