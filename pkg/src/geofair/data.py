"""Village data model, CSV ingestion/serialization, and summary statistics.

The external CSV schema is fixed (exact header, comma separated, UTF-8,
'.' decimal point):

    village_id,state_id,lat,lon,ntl,population,poverty_rate,electricity,share_sc,share_st

`electricity` is the only field that may be empty (missing); every other
blank or out-of-range cell makes the row invalid. Invalid rows are dropped
(with a reported count) or, under strict ingestion, abort with RowInvalid.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import EmptyDataset, RowInvalid, SchemaMismatch

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "village_id", "state_id", "lat", "lon", "ntl",
    "population", "poverty_rate", "electricity", "share_sc", "share_st",
)

# Table-1-shaped summary variables, in report order
SUMMARY_VARIABLES = (
    "poverty_rate", "electricity", "ntl", "population", "share_sc", "share_st",
)


@dataclass(frozen=True)
class VillageRecord:
    """One village row; all fields validated, electricity optionally missing."""

    village_id: str
    state_id: str
    lat: float
    lon: float
    ntl: float
    population: int
    poverty_rate: float
    electricity: Optional[int]  # 1 = fully electrified, 0 = not, None = missing
    share_sc: float
    share_st: float

    def validate(self) -> None:
        """Raise ValueError naming the offending field on any invariant breach."""
        if not self.village_id:
            raise ValueError("village_id: must be non-empty")
        if not self.state_id:
            raise ValueError("state_id: must be non-empty")
        for name, lo, hi in (
            ("lat", -90.0, 90.0),
            ("lon", -180.0, 180.0),
            ("ntl", 0.0, 63.0),
            ("poverty_rate", 0.0, 1.0),
            ("share_sc", 0.0, 1.0),
            ("share_st", 0.0, 1.0),
        ):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name}: must be finite")
            if not lo <= v <= hi:
                raise ValueError(f"{name}: {v!r} outside [{lo}, {hi}]")
        if self.population < 0:
            raise ValueError(f"population: {self.population!r} is negative")
        if self.electricity is not None and self.electricity not in (0, 1):
            raise ValueError(f"electricity: {self.electricity!r} not in {{0, 1, missing}}")


@dataclass(frozen=True)
class IngestDiagnostics:
    rows_read: int
    rows_dropped: int
    zero_population: int
    errors: tuple = ()  # first few (line, field, message) triples


class Dataset:
    """Immutable, ordered collection of VillageRecord with unique ids.

    Iteration order is construction order (= file order for ingested data).
    Column access returns cached numpy arrays; missing electricity appears
    as NaN in its column.
    """

    def __init__(self, records: Sequence[VillageRecord], provenance: str = "",
                 diagnostics: Optional[IngestDiagnostics] = None):
        records = tuple(records)
        if not records:
            raise EmptyDataset("a Dataset must contain at least one record")
        seen = set()
        for r in records:
            if r.village_id in seen:
                raise ValueError(f"duplicate village_id {r.village_id!r}")
            seen.add(r.village_id)
        self._records = records
        self.provenance = provenance
        self.diagnostics = diagnostics
        self._columns: dict = {}

    @property
    def records(self) -> tuple:
        return self._records

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[VillageRecord]:
        return iter(self._records)

    def __getitem__(self, i: int) -> VillageRecord:
        return self._records[i]

    def column(self, name: str) -> np.ndarray:
        """Numeric column as float64 (int64 for population); NaN = missing."""
        if name not in self._columns:
            if name == "population":
                arr = np.asarray([r.population for r in self._records], dtype=np.int64)
            elif name == "electricity":
                arr = np.asarray(
                    [np.nan if r.electricity is None else float(r.electricity)
                     for r in self._records], dtype=np.float64)
            else:
                arr = np.asarray([getattr(r, name) for r in self._records],
                                 dtype=np.float64)
            arr.setflags(write=False)
            self._columns[name] = arr
        return self._columns[name]

    def village_ids(self) -> list:
        return [r.village_id for r in self._records]

    def state_ids(self) -> list:
        return [r.state_id for r in self._records]

    def states(self) -> list:
        """Sorted distinct state ids."""
        return sorted({r.state_id for r in self._records})

    def state_populations(self) -> dict:
        pops: dict = {}
        for r in self._records:
            pops[r.state_id] = pops.get(r.state_id, 0) + r.population
        return pops

    def subset(self, indices) -> "Dataset":
        """New Dataset from row indices, preserving relative order."""
        return Dataset([self._records[int(i)] for i in indices],
                       provenance=self.provenance)

    def restrict_states(self, states) -> "Dataset":
        states = set(states)
        return Dataset([r for r in self._records if r.state_id in states],
                       provenance=self.provenance)


# ---------------------------------------------------------------------------
# ingestion / serialization
# ---------------------------------------------------------------------------

def _parse_row(row: list, line: int) -> VillageRecord:
    if len(row) != len(CSV_COLUMNS):
        raise RowInvalid(line, "*", f"expected {len(CSV_COLUMNS)} cells, got {len(row)}")
    cells = dict(zip(CSV_COLUMNS, row))

    def fnum(name: str) -> float:
        try:
            return float(cells[name])
        except ValueError:
            raise RowInvalid(line, name, f"not a number: {cells[name]!r}") from None

    def inum(name: str) -> int:
        try:
            return int(cells[name])
        except ValueError:
            raise RowInvalid(line, name, f"not an integer: {cells[name]!r}") from None

    elec_cell = cells["electricity"].strip()
    electricity: Optional[int]
    if elec_cell == "":
        electricity = None
    else:
        try:
            electricity = int(elec_cell)
        except ValueError:
            raise RowInvalid(line, "electricity", f"not 0/1/empty: {elec_cell!r}") from None

    rec = VillageRecord(
        village_id=cells["village_id"],
        state_id=cells["state_id"],
        lat=fnum("lat"),
        lon=fnum("lon"),
        ntl=fnum("ntl"),
        population=inum("population"),
        poverty_rate=fnum("poverty_rate"),
        electricity=electricity,
        share_sc=fnum("share_sc"),
        share_st=fnum("share_st"),
    )
    try:
        rec.validate()
    except ValueError as exc:
        fld, _, msg = str(exc).partition(": ")
        raise RowInvalid(line, fld, msg) from None
    return rec


def ingest_csv(path, strict: bool = False) -> Dataset:
    """Read and validate a village CSV.

    strict=True aborts on the first invalid row (RowInvalid); otherwise
    invalid rows (including duplicate ids) are dropped and counted in the
    returned Dataset's diagnostics.
    """
    records = []
    seen: set = set()
    rows_read = 0
    dropped = 0
    zero_pop = 0
    errors = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise SchemaMismatch(
                f"header {header!r} does not match required schema {','.join(CSV_COLUMNS)}"
            )
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            rows_read += 1
            try:
                rec = _parse_row(row, line)
                if rec.village_id in seen:
                    raise RowInvalid(line, "village_id", f"duplicate id {rec.village_id!r}")
            except RowInvalid as exc:
                if strict:
                    raise
                dropped += 1
                if len(errors) < 10:
                    errors.append((exc.line, exc.field, str(exc)))
                continue
            seen.add(rec.village_id)
            if rec.population == 0:
                zero_pop += 1
            records.append(rec)
    if not records:
        raise EmptyDataset(f"no valid rows in {path}")
    diag = IngestDiagnostics(rows_read=rows_read, rows_dropped=dropped,
                             zero_population=zero_pop, errors=tuple(errors))
    if dropped:
        logger.warning("ingest %s: dropped %d of %d rows", path, dropped, rows_read)
    if zero_pop:
        logger.info("ingest %s: %d villages report zero population", path, zero_pop)
    return Dataset(records, provenance=str(path), diagnostics=diag)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(ds: Dataset, path) -> None:
    """Serialize a Dataset; ingest(write(ds)) reproduces ds bit for bit."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in ds:
            writer.writerow([
                r.village_id, r.state_id, _cell(r.lat), _cell(r.lon), _cell(r.ntl),
                r.population, _cell(r.poverty_rate), _cell(r.electricity),
                _cell(r.share_sc), _cell(r.share_st),
            ])


# ---------------------------------------------------------------------------
# summary statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    variable: str
    n: int
    mean: float
    std: float
    p25: float
    p50: float
    p75: float


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple = field(default_factory=tuple)

    def row(self, variable: str) -> SummaryRow:
        for r in self.rows:
            if r.variable == variable:
                return r
        raise KeyError(variable)

    def to_csv(self) -> str:
        def fmt(x: float) -> str:
            return "" if math.isnan(x) else repr(float(x))

        lines = ["variable,n,mean,std,p25,p50,p75"]
        for r in self.rows:
            lines.append(",".join([r.variable, str(r.n), fmt(r.mean), fmt(r.std),
                                   fmt(r.p25), fmt(r.p50), fmt(r.p75)]))
        return "\n".join(lines) + "\n"


def summarize(ds: Dataset) -> SummaryTable:
    """Per-variable {n, mean, sample std, p25/p50/p75} over the dataset.

    Percentiles use linear interpolation between order statistics. Missing
    electricity values are excluded from that column only. Permutation of the
    records never changes the result.
    """
    rows = []
    for name in SUMMARY_VARIABLES:
        col = ds.column(name).astype(np.float64)
        # sorting first makes every statistic exactly permutation-invariant
        # (float addition is not commutative under reordering)
        vals = np.sort(col[~np.isnan(col)])
        n = int(vals.size)
        if n == 0:
            rows.append(SummaryRow(name, 0, math.nan, math.nan,
                                   math.nan, math.nan, math.nan))
            continue
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if n >= 2 else math.nan
        p25, p50, p75 = (float(p) for p in np.percentile(vals, [25.0, 50.0, 75.0]))
        rows.append(SummaryRow(name, n, mean, std, p25, p50, p75))
    return SummaryTable(tuple(rows))
