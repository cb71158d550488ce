import math

import numpy as np
import pytest

from geofair.data import (CSV_COLUMNS, Dataset, ingest_csv, summarize,
                          write_csv)
from geofair.errors import EmptyDataset, RowInvalid, SchemaMismatch

from oracles import percentile_oracle

HEADER = ",".join(CSV_COLUMNS)


def write(tmp_path, body, name="v.csv"):
    path = tmp_path / name
    path.write_text(body, encoding="utf-8")
    return path


GOOD_ROWS = [
    "V1,S1,20.5,78.1,3.2,850,0.41,1,0.2,0.0",
    "V2,S1,21.0,78.9,0.0,432,0.38,0,0.05,0.31",
    "V3,S2,19.2,79.5,12.75,1900,0.12,,0.18,0.0",
]


def test_ingest_wellformed_preserves_order(tmp_path):
    ds = ingest_csv(write(tmp_path, HEADER + "\n" + "\n".join(GOOD_ROWS) + "\n"))
    assert len(ds) == 3
    assert ds.village_ids() == ["V1", "V2", "V3"]
    assert ds.diagnostics.rows_dropped == 0


def test_ingest_empty_electricity_is_missing(tmp_path):
    ds = ingest_csv(write(tmp_path, HEADER + "\n" + "\n".join(GOOD_ROWS) + "\n"))
    assert ds[2].electricity is None
    assert np.isnan(ds.column("electricity")[2])
    assert ds[0].electricity == 1


def test_ingest_ntl_out_of_range_dropped(tmp_path):
    rows = GOOD_ROWS + ["V4,S2,19.0,79.0,64.5,100,0.2,1,0.1,0.0"]
    ds = ingest_csv(write(tmp_path, HEADER + "\n" + "\n".join(rows) + "\n"))
    assert len(ds) == 3
    assert ds.diagnostics.rows_dropped == 1
    assert ds.diagnostics.errors[0][1] == "ntl"


def test_ingest_strict_raises_with_line_and_field(tmp_path):
    rows = GOOD_ROWS + ["V4,S2,19.0,79.0,64.5,100,0.2,1,0.1,0.0"]
    path = write(tmp_path, HEADER + "\n" + "\n".join(rows) + "\n")
    with pytest.raises(RowInvalid) as err:
        ingest_csv(path, strict=True)
    assert err.value.line == 5
    assert err.value.field == "ntl"


@pytest.mark.parametrize("bad_header", [
    HEADER.replace("ntl", "lights"),            # renamed column
    ",".join(CSV_COLUMNS[:-1]),                 # missing column
    HEADER + ",extra",                          # extra column
    ",".join(reversed(CSV_COLUMNS)),            # reordered
])
def test_ingest_schema_mismatch(tmp_path, bad_header):
    with pytest.raises(SchemaMismatch):
        ingest_csv(write(tmp_path, bad_header + "\n" + GOOD_ROWS[0] + "\n"))


def test_ingest_missing_file():
    with pytest.raises(FileNotFoundError):
        ingest_csv("/nonexistent/never.csv")


def test_ingest_all_rows_invalid(tmp_path):
    body = HEADER + "\nV1,S1,999,78.1,3.2,850,0.41,1,0.2,0.0\n"
    with pytest.raises(EmptyDataset):
        ingest_csv(write(tmp_path, body))


def test_ingest_blank_non_electricity_cell_is_row_error(tmp_path):
    body = HEADER + "\nV1,S1,20.5,,3.2,850,0.41,1,0.2,0.0\n" + GOOD_ROWS[1] + "\n"
    ds = ingest_csv(write(tmp_path, body))
    assert len(ds) == 1
    assert ds.diagnostics.errors[0][1] == "lon"


def test_ingest_duplicate_id_dropped(tmp_path):
    rows = [GOOD_ROWS[0], GOOD_ROWS[0]]
    ds = ingest_csv(write(tmp_path, HEADER + "\n" + "\n".join(rows) + "\n"))
    assert len(ds) == 1
    assert ds.diagnostics.rows_dropped == 1


def test_ingest_zero_population_accepted_and_flagged(tmp_path):
    rows = GOOD_ROWS + ["V9,S2,19.0,79.0,5.0,0,0.2,1,0.1,0.0"]
    ds = ingest_csv(write(tmp_path, HEADER + "\n" + "\n".join(rows) + "\n"))
    assert len(ds) == 4
    assert ds.diagnostics.zero_population == 1


def test_roundtrip_bitwise(tmp_path, random_dataset):
    ds = random_dataset(200, seed=11, missing_elec=0.3)
    out = tmp_path / "rt.csv"
    write_csv(ds, out)
    back = ingest_csv(out)
    assert len(back) == len(ds)
    for a, b in zip(ds, back):
        assert a == b  # dataclass equality is field-by-field, bitwise for floats
    # a second hop produces identical bytes
    out2 = tmp_path / "rt2.csv"
    write_csv(back, out2)
    assert out.read_bytes() == out2.read_bytes()


def test_dataset_rejects_duplicates_and_empty(village_factory):
    with pytest.raises(ValueError):
        Dataset([village_factory(1), village_factory(1)])
    with pytest.raises(EmptyDataset):
        Dataset([])


# ---------------------------------------------------------------------------
# summarize
# ---------------------------------------------------------------------------

def test_summarize_constant_column(village_factory):
    ds = Dataset([village_factory(i, poverty_rate=0.35) for i in range(5)])
    row = summarize(ds).row("poverty_rate")
    assert row.mean == 0.35
    assert row.std == 0.0
    assert row.p25 == row.p50 == row.p75 == 0.35


def test_summarize_linear_interpolation_percentiles(village_factory):
    # values {1,2,3,4}: p25 = 1.75, p50 = 2.5, p75 = 3.25
    ds = Dataset([village_factory(i, ntl=float(v)) for i, v in enumerate([1, 2, 3, 4])])
    row = summarize(ds).row("ntl")
    assert row.p25 == pytest.approx(1.75, abs=1e-12)
    assert row.p50 == pytest.approx(2.5, abs=1e-12)
    assert row.p75 == pytest.approx(3.25, abs=1e-12)
    for q, got in ((25, row.p25), (50, row.p50), (75, row.p75)):
        assert got == pytest.approx(percentile_oracle([1, 2, 3, 4], q), abs=1e-12)


def test_summarize_against_percentile_oracle_random(random_dataset):
    ds = random_dataset(157, seed=5)
    table = summarize(ds)
    for var in ("ntl", "poverty_rate", "population", "share_sc"):
        vals = ds.column(var).astype(float).tolist()
        row = table.row(var)
        for q, got in ((25, row.p25), (50, row.p50), (75, row.p75)):
            assert got == pytest.approx(percentile_oracle(vals, q), rel=1e-12)
        assert row.n == len(vals)
        assert row.mean == pytest.approx(sum(vals) / len(vals), rel=1e-12)


def test_summarize_excludes_missing_electricity_only(random_dataset):
    ds = random_dataset(300, seed=7, missing_elec=0.4)
    table = summarize(ds)
    n_present = int((~np.isnan(ds.column("electricity"))).sum())
    assert table.row("electricity").n == n_present
    assert table.row("poverty_rate").n == len(ds)


def test_summarize_permutation_invariant(random_dataset):
    ds = random_dataset(80, seed=3, missing_elec=0.2)
    rng = np.random.default_rng(0)
    perm = rng.permutation(len(ds))
    shuffled = ds.subset(perm)
    assert summarize(ds) == summarize(shuffled)


def test_summarize_percentile_ordering(random_dataset):
    for seed in range(5):
        ds = random_dataset(60, seed=seed)
        for row in summarize(ds).rows:
            if row.n == 0:
                continue
            vals = ds.column(row.variable)
            vals = vals[~np.isnan(vals)]
            assert vals.min() <= row.p25 <= row.p50 <= row.p75 <= vals.max()


def test_summary_csv_shape(random_dataset):
    text = summarize(random_dataset(40, seed=2)).to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "variable,n,mean,std,p25,p50,p75"
    assert len(lines) == 7  # six summary variables
    assert not math.isnan(float(lines[1].split(",")[2]))
