"""
Tests for triplet ingest, indexing and incidence summaries
"""
import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from core.errors import DataFormatError, DuplicateCellError
from schemas.dataset import ParseOptions, TripletRecord
from services.dataset import (
    TripletDataset,
    incidence_summary,
    ingest,
    ingest_path,
    nu_a_size_biased,
    write_triplets,
)
from tests.conftest import D1_LABELED_TEXT, D1_TEXT


def test_ingest_d1_summary():
    ds = ingest(D1_TEXT.encode())
    summary = incidence_summary(ds)
    assert (ds.N, ds.R, ds.C) == (4, 2, 2)
    assert summary.nu_a == 2.0
    assert summary.nu_b == 2.0
    np.testing.assert_allclose(summary.mu_row, [1.0, 1.0])
    np.testing.assert_allclose(summary.mu_col, [1.0, 1.0])
    assert summary.epsilon_n == 0.5


def test_indices_follow_first_appearance():
    ds = ingest(b"row,col,value\nb,y,1\na,y,2\nb,x,3\n")
    assert ds.row_keys == ("b", "a")
    assert ds.col_keys == ("y", "x")
    assert list(ds.row_idx) == [0, 1, 0]
    assert list(ds.col_idx) == [0, 0, 1]


def test_tab_delimited_input_with_labels():
    ds = ingest(D1_LABELED_TEXT.replace(",", "\t").encode())
    assert ds.has_labels
    assert ds.label_names == ("Sun", "Tue")
    assert list(ds.labels()) == ["Sun", "Tue", "Sun", "Tue"]


def test_single_record():
    summary = incidence_summary(ingest(b"row,col,value\nu,m,4.5\n"))
    assert summary.N == 1
    assert summary.nu_a == 1.0 and summary.nu_b == 1.0
    assert summary.epsilon_n == 1.0


def test_empty_input_rejected():
    with pytest.raises(DataFormatError, match="empty input"):
        ingest(b"")
    with pytest.raises(DataFormatError, match="empty input"):
        ingest(b"row,col,value\n")


def test_bad_header_reports_line_one():
    with pytest.raises(DataFormatError) as err:
        ingest(b"user,item,rating\nu,i,1\n")
    assert err.value.line == 1


@pytest.mark.parametrize("token,reason", [("inf", "non-finite"), ("nan", "non-finite"), ("abc", "malformed")])
def test_bad_values_report_file_line(token, reason):
    text = f"row,col,value\nr1,c1,1\n\nr2,c1,{token}\n"
    with pytest.raises(DataFormatError, match=reason) as err:
        ingest(text.encode())
    assert err.value.line == 4


def test_missing_field_is_malformed():
    with pytest.raises(DataFormatError, match="malformed") as err:
        ingest(b"row,col,value\nr1,c1,1\nr2,c2\n")
    assert err.value.line == 3


def test_duplicate_cell_rejected_by_default():
    with pytest.raises(DuplicateCellError) as err:
        ingest((D1_TEXT + "r1,c1,5\n").encode())
    assert err.value.line == 6
    assert err.value.policy == "error"
    assert "line 6" in str(err.value)


def test_duplicate_policy_first_and_mean():
    text = (D1_TEXT + "r1,c1,5\n").encode()
    first = ingest(text, ParseOptions(duplicate_policy="first"))
    mean = ingest(text, ParseOptions(duplicate_policy="mean"))
    assert first.N == mean.N == 4
    assert first.values[0] == 1.0
    assert mean.values[0] == 3.0


def test_mean_policy_needs_agreeing_labels():
    text = (D1_LABELED_TEXT + "r1,c1,5,Tue\n").encode()
    with pytest.raises(DataFormatError, match="disagreeing labels"):
        ingest(text, ParseOptions(duplicate_policy="mean"))


def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(DataFormatError, match="cannot read"):
        ingest_path(tmp_path / "absent.csv")


def test_write_then_ingest_reproduces_dataset(tmp_path, sparse_grid):
    path = tmp_path / "grid.csv"
    write_triplets(sparse_grid, path)
    again = ingest_path(path)
    assert again.row_keys == sparse_grid.row_keys
    assert again.col_keys == sparse_grid.col_keys
    np.testing.assert_array_equal(again.row_idx, sparse_grid.row_idx)
    np.testing.assert_array_equal(again.values, sparse_grid.values)


def test_subset_drops_empty_entities(sparse_grid):
    keep = sparse_grid.row_idx != 1
    sub = sparse_grid.subset(keep)
    assert sub.N == 6
    assert sub.R == 2
    assert sub.row_keys == ("0", "2")
    assert incidence_summary(sub).N == 6


def test_from_records_and_records_agree(d1_labeled):
    again = TripletDataset.from_records(d1_labeled.records())
    np.testing.assert_array_equal(again.values, d1_labeled.values)
    assert list(again.labels()) == list(d1_labeled.labels())


def test_from_records_rejects_duplicates():
    recs = [TripletRecord(row_key="a", col_key="x", value=1.0), TripletRecord(row_key="a", col_key="x", value=2.0)]
    with pytest.raises(DuplicateCellError):
        TripletDataset.from_records(recs)


def test_record_value_must_be_finite():
    with pytest.raises(ValueError):
        TripletRecord(row_key="a", col_key="x", value=float("inf"))


def test_row_adjacency_lists_positions(sparse_grid):
    indptr, order = sparse_grid.row_adjacency
    assert list(indptr) == [0, 3, 5, 8]
    for i in range(sparse_grid.R):
        assert set(sparse_grid.row_idx[order[indptr[i]:indptr[i + 1]]]) == {i}


def test_arrays_are_read_only(d1):
    with pytest.raises(ValueError):
        d1.values[0] = 10.0


@st.composite
def patterns(draw):
    R = draw(st.integers(1, 6))
    C = draw(st.integers(1, 6))
    cells = draw(st.sets(st.integers(0, R * C - 1), min_size=1, max_size=R * C))
    cells = np.array(sorted(cells))
    return TripletDataset.from_arrays(cells // C, cells % C, np.zeros(cells.size))


@hsettings(max_examples=60, deadline=None)
@given(patterns())
def test_summary_identities(ds):
    summary = incidence_summary(ds)
    assert summary.n_row.sum() == summary.N == summary.n_col.sum()
    assert summary.nu_a == pytest.approx(nu_a_size_biased(ds))
    # each mu is a probability
    assert np.all(summary.mu_row > 0) and np.all(summary.mu_row <= 1 + 1e-12)
    assert summary.mu_row.sum() == pytest.approx(summary.nu_b)
    assert summary.mu_col.sum() == pytest.approx(summary.nu_a)
    assert np.dot(summary.n_row, summary.mu_row) == pytest.approx(np.dot(summary.n_col, summary.mu_col))
    assert 0 < summary.epsilon_n <= 1
