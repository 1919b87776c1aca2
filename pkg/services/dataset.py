"""
Triplet Dataset Service
Ingests, validates, indexes and summarizes sparse crossed (row, col, value) data
"""
import io
import logging
import re
from functools import cached_property
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.config import settings
from core.errors import DataFormatError, DuplicateCellError
from schemas.dataset import IncidenceSummary, ParseOptions, TripletRecord

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ["row", "col", "value"]
LABEL_COLUMN = "label"
NO_LABEL = -1

Source = Union[str, Path, BinaryIO, bytes]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _first_appearance_codes(idx: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Re-code integer ids densely in order of first appearance

    Returns:
        (codes, originals) where originals[code] is the id that received it
    """
    codes, uniques = pd.factorize(idx, sort=False)
    return codes.astype(np.int64), np.asarray(uniques)


class TripletDataset:
    """
    Immutable sparse crossed dataset

    Observations are stored column-wise: dense row index, dense column index,
    value and an optional label code per record, in record order. Dense
    indices are assigned by first appearance.
    """

    def __init__(
        self,
        row_idx: np.ndarray,
        col_idx: np.ndarray,
        values: np.ndarray,
        row_keys: Sequence[str],
        col_keys: Sequence[str],
        label_codes: Optional[np.ndarray] = None,
        label_names: Sequence[str] = (),
    ):
        row_idx = np.asarray(row_idx, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)

        if row_idx.ndim != 1 or row_idx.shape != col_idx.shape or row_idx.shape != values.shape:
            raise DataFormatError("row, col and value arrays must be one-dimensional and equally long")
        if row_idx.size == 0:
            raise DataFormatError("empty input: a dataset needs at least one record")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataFormatError(f"non-finite value at record {bad}")
        if row_idx.min() < 0 or row_idx.max() >= len(row_keys):
            raise DataFormatError("row index out of range of row keys")
        if col_idx.min() < 0 or col_idx.max() >= len(col_keys):
            raise DataFormatError("col index out of range of col keys")

        self.row_idx = _readonly(row_idx)
        self.col_idx = _readonly(col_idx)
        self.values = _readonly(values)
        self.row_keys: Tuple[str, ...] = tuple(row_keys)
        self.col_keys: Tuple[str, ...] = tuple(col_keys)
        self.label_names: Tuple[str, ...] = tuple(label_names)
        if label_codes is not None:
            label_codes = np.asarray(label_codes, dtype=np.int64)
            if label_codes.shape != row_idx.shape:
                raise DataFormatError("label codes must align with records")
            if label_codes.max(initial=NO_LABEL) >= len(self.label_names):
                raise DataFormatError("label code out of range of label names")
            label_codes = _readonly(label_codes)
        self.label_codes: Optional[np.ndarray] = label_codes

        counts = np.bincount(self.row_idx, minlength=self.R)
        if np.any(counts == 0):
            raise DataFormatError("every row key must own at least one record")
        counts = np.bincount(self.col_idx, minlength=self.C)
        if np.any(counts == 0):
            raise DataFormatError("every col key must own at least one record")

    # Construction helpers

    @classmethod
    def from_arrays(
        cls,
        row_ids: np.ndarray,
        col_ids: np.ndarray,
        values: np.ndarray,
        labels: Optional[Sequence[Optional[str]]] = None,
        row_keys: Optional[Sequence[str]] = None,
        col_keys: Optional[Sequence[str]] = None,
    ) -> "TripletDataset":
        """
        Build a dataset from raw integer ids

        Ids are re-coded by first appearance, so entities without records
        vanish. Keys default to the decimal id.
        """
        row_ids = np.asarray(row_ids, dtype=np.int64)
        col_ids = np.asarray(col_ids, dtype=np.int64)
        if row_ids.size == 0:
            raise DataFormatError("empty input: a dataset needs at least one record")
        row_idx, row_orig = _first_appearance_codes(row_ids)
        col_idx, col_orig = _first_appearance_codes(col_ids)
        R, C = row_orig.size, col_orig.size

        cell = row_idx * C + col_idx
        dup = pd.Series(cell).duplicated(keep="first").to_numpy()
        if dup.any():
            pos = int(np.flatnonzero(dup)[0])
            raise DataFormatError(f"duplicate cell ({row_ids[pos]}, {col_ids[pos]}) at record {pos}")

        rk = [str(r) for r in row_orig] if row_keys is None else [row_keys[int(r)] for r in row_orig]
        ck = [str(c) for c in col_orig] if col_keys is None else [col_keys[int(c)] for c in col_orig]
        label_codes, label_names = _encode_labels(labels)
        return cls(row_idx, col_idx, values, rk, ck, label_codes, label_names)

    @classmethod
    def from_records(cls, records: Iterable[TripletRecord]) -> "TripletDataset":
        """Build a dataset from validated records; duplicate cells are rejected"""
        row_index: Dict[str, int] = {}
        col_index: Dict[str, int] = {}
        rows: List[int] = []
        cols: List[int] = []
        vals: List[float] = []
        labels: List[Optional[str]] = []
        seen = set()
        for pos, rec in enumerate(records):
            i = row_index.setdefault(rec.row_key, len(row_index))
            j = col_index.setdefault(rec.col_key, len(col_index))
            if (i, j) in seen:
                raise DuplicateCellError(rec.row_key, rec.col_key, line=pos + 1, policy="error")
            seen.add((i, j))
            rows.append(i)
            cols.append(j)
            vals.append(rec.value)
            labels.append(rec.label)
        if not rows:
            raise DataFormatError("empty input: a dataset needs at least one record")
        label_codes, label_names = _encode_labels(labels if any(l is not None for l in labels) else None)
        return cls(np.array(rows), np.array(cols), np.array(vals), list(row_index), list(col_index),
                   label_codes, label_names)

    def with_values(self, values: np.ndarray) -> "TripletDataset":
        """Same pattern, keys and labels with new response values"""
        return TripletDataset(self.row_idx, self.col_idx, values, self.row_keys, self.col_keys,
                              self.label_codes, self.label_names)

    def subset(self, keep: np.ndarray) -> "TripletDataset":
        """
        Restrict to the records where keep is True

        Entities left without records are dropped and the remaining ones are
        re-indexed by first appearance.
        """
        keep = np.asarray(keep, dtype=bool)
        if not keep.any():
            raise DataFormatError("empty input: subset keeps no records")
        labels = None
        if self.label_codes is not None:
            labels = self.labels()[keep]
        return TripletDataset.from_arrays(
            self.row_idx[keep], self.col_idx[keep], self.values[keep], labels,
            row_keys=self.row_keys, col_keys=self.col_keys,
        )

    # Shape

    @property
    def R(self) -> int:
        return len(self.row_keys)

    @property
    def C(self) -> int:
        return len(self.col_keys)

    @property
    def N(self) -> int:
        return int(self.values.shape[0])

    @cached_property
    def row_index(self) -> Dict[str, int]:
        return {k: i for i, k in enumerate(self.row_keys)}

    @cached_property
    def col_index(self) -> Dict[str, int]:
        return {k: j for j, k in enumerate(self.col_keys)}

    @cached_property
    def n_row(self) -> np.ndarray:
        return _readonly(np.bincount(self.row_idx, minlength=self.R).astype(np.int64))

    @cached_property
    def n_col(self) -> np.ndarray:
        return _readonly(np.bincount(self.col_idx, minlength=self.C).astype(np.int64))

    @cached_property
    def row_adjacency(self) -> Tuple[np.ndarray, np.ndarray]:
        """(indptr, positions): record positions of row i are positions[indptr[i]:indptr[i+1]]"""
        order = np.argsort(self.row_idx, kind="stable")
        indptr = np.concatenate(([0], np.cumsum(self.n_row)))
        return _readonly(indptr), _readonly(order)

    @property
    def has_labels(self) -> bool:
        return self.label_codes is not None

    def labels(self) -> np.ndarray:
        """Per-record label strings (None where unlabeled) as an object array"""
        out = np.full(self.N, None, dtype=object)
        if self.label_codes is not None:
            names = np.array(self.label_names, dtype=object)
            tagged = self.label_codes != NO_LABEL
            out[tagged] = names[self.label_codes[tagged]]
        return out

    def label_mask(self, label: str) -> np.ndarray:
        """Boolean mask of records carrying label"""
        if self.label_codes is None or label not in self.label_names:
            return np.zeros(self.N, dtype=bool)
        return self.label_codes == self.label_names.index(label)

    def records(self) -> Iterator[TripletRecord]:
        """Yield records in dataset order"""
        labels = self.labels()
        for pos in range(self.N):
            yield TripletRecord(
                row_key=self.row_keys[self.row_idx[pos]],
                col_key=self.col_keys[self.col_idx[pos]],
                value=float(self.values[pos]),
                label=labels[pos],
            )

    def __len__(self) -> int:
        return self.N

    def __repr__(self):
        return f"<TripletDataset N={self.N} R={self.R} C={self.C}>"


def _encode_labels(labels: Optional[Sequence[Optional[str]]]) -> Tuple[Optional[np.ndarray], List[str]]:
    if labels is None:
        return None, []
    series = pd.Series(list(labels), dtype=object)
    codes, names = pd.factorize(series, sort=False, use_na_sentinel=True)
    return codes.astype(np.int64), [str(n) for n in names]


# Ingest

_TOKENIZE_LINE = re.compile(r"line (\d+)")


def _read_bytes(source: Source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, (str, Path)):
        try:
            return Path(source).read_bytes()
        except OSError as e:
            raise DataFormatError(f"cannot read {source}: {e}")
    return source.read()


def _detect_delimiter(header: str) -> str:
    return "\t" if "\t" in header else ","


def ingest(source: Source, options: Optional[ParseOptions] = None) -> TripletDataset:
    """
    Parse header-first delimited text into a validated dataset

    Args:
        source: path, bytes or binary stream with columns row,col,value[,label]
        options: parse options; the duplicate policy defaults to settings

    Returns:
        TripletDataset whose record order is the file order
    """
    options = options or ParseOptions(duplicate_policy=settings.DUPLICATE_POLICY)
    raw = _read_bytes(source)
    try:
        text = raw.decode(options.encoding)
    except UnicodeDecodeError as e:
        raise DataFormatError(f"input is not valid {options.encoding}: {e}")
    if not text.strip():
        raise DataFormatError("empty input", line=1)

    header = text.split("\n", 1)[0].rstrip("\r")
    sep = options.delimiter or _detect_delimiter(header)
    columns = [c.strip().lower() for c in header.split(sep)]
    if columns[:3] != REQUIRED_COLUMNS or len(columns) > 4 or (len(columns) == 4 and columns[3] != LABEL_COLUMN):
        raise DataFormatError(f"header must be row{sep}col{sep}value[{sep}label], got {header!r}", line=1)

    try:
        frame = pd.read_csv(
            io.StringIO(text), sep=sep, dtype=str, keep_default_na=False, na_filter=False,
            header=0, names=columns, skip_blank_lines=True, engine="c",
        )
    except pd.errors.ParserError as e:
        match = _TOKENIZE_LINE.search(str(e))
        raise DataFormatError(f"malformed line: {e}", line=int(match.group(1)) if match else None)
    except pd.errors.EmptyDataError:
        raise DataFormatError("empty input", line=1)

    if frame.empty:
        raise DataFormatError("empty input: header without records", line=2)

    # file line numbers; blank lines are skipped by the reader
    line_numbers = _data_line_numbers(text)

    for col in REQUIRED_COLUMNS:
        blank = frame[col].isna() | (frame[col] == "")
        if blank.any():
            pos = int(np.flatnonzero(blank.to_numpy())[0])
            raise DataFormatError(f"malformed line: missing '{col}' field", line=line_numbers[pos])

    values = pd.to_numeric(frame["value"], errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        token = frame["value"].iat[pos]
        reason = "non-finite value" if _parses_as_float(token) else "malformed value"
        raise DataFormatError(f"{reason} {token!r}", line=line_numbers[pos])

    row_codes, row_keys = pd.factorize(frame["row"], sort=False)
    col_codes, col_keys = pd.factorize(frame["col"], sort=False)
    row_codes = row_codes.astype(np.int64)
    col_codes = col_codes.astype(np.int64)
    labels = None
    if LABEL_COLUMN in frame.columns:
        labels = frame[LABEL_COLUMN].where(frame[LABEL_COLUMN] != "", None).to_numpy(dtype=object)

    cell = row_codes * len(col_keys) + col_codes
    dup = pd.Series(cell).duplicated(keep="first").to_numpy()
    if dup.any():
        if options.duplicate_policy == "error":
            pos = int(np.flatnonzero(dup)[0])
            raise DuplicateCellError(frame["row"].iat[pos], frame["col"].iat[pos],
                                     line=line_numbers[pos], policy="error")
        logger.warning(f"{int(dup.sum())} duplicate cells resolved with policy '{options.duplicate_policy}'")
        if options.duplicate_policy == "mean":
            values, labels = _mean_duplicates(cell, values, labels, line_numbers)
        else:
            values = values[~dup]
            labels = labels[~dup] if labels is not None else None
        row_codes = row_codes[~dup]
        col_codes = col_codes[~dup]

    label_codes, label_names = _encode_labels(labels)
    ds = TripletDataset(row_codes, col_codes, values, [str(k) for k in row_keys], [str(k) for k in col_keys],
                        label_codes, label_names)
    logger.info(f"Ingested {ds.N} records over {ds.R} rows and {ds.C} columns")
    return ds


def _data_line_numbers(text: str) -> np.ndarray:
    """1-based file line number of each non-blank data line"""
    lines = text.split("\n")
    return np.array([n + 1 for n, line in enumerate(lines) if n > 0 and line.strip("\r").strip()], dtype=np.int64)


def _parses_as_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _mean_duplicates(
    cell: np.ndarray, values: np.ndarray, labels: Optional[np.ndarray], line_numbers: np.ndarray
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Average duplicate cells onto their first occurrence"""
    grouped = pd.Series(values).groupby(cell, sort=False)
    means = grouped.transform("mean").to_numpy()
    first = ~pd.Series(cell).duplicated(keep="first").to_numpy()
    if labels is not None:
        frame = pd.DataFrame({"cell": cell, "label": pd.Series(labels, dtype=object).fillna("")})
        distinct = frame.groupby("cell", sort=False)["label"].transform("nunique").to_numpy()
        if np.any(distinct > 1):
            pos = int(np.flatnonzero(distinct > 1)[-1])
            raise DataFormatError("duplicate cells with disagreeing labels under policy 'mean'",
                                  line=line_numbers[pos])
        labels = labels[first]
    return means[first], labels


def ingest_path(path: Union[str, Path], duplicate_policy: Optional[str] = None) -> TripletDataset:
    """Ingest a file path with an optional duplicate policy override"""
    options = ParseOptions(duplicate_policy=duplicate_policy or settings.DUPLICATE_POLICY)
    return ingest(Path(path), options)


def write_triplets(ds: TripletDataset, path: Union[str, Path]) -> None:
    """
    Write the canonical comma-separated text form

    Floats use 17 significant digits so re-ingest is bit-exact.
    """
    frame = pd.DataFrame({
        "row": np.array(ds.row_keys, dtype=object)[ds.row_idx],
        "col": np.array(ds.col_keys, dtype=object)[ds.col_idx],
        "value": ds.values,
    })
    if ds.has_labels:
        frame["label"] = pd.Series(ds.labels(), dtype=object).fillna("")
    frame.to_csv(path, index=False, float_format=settings.PLOT_FLOAT_FORMAT)


# Summary

def incidence_summary(ds: TripletDataset) -> IncidenceSummary:
    """
    Compute n_i., n_.j, nu_A, nu_B, mu_i., mu_.j and epsilon_N

    Count products are summed in int64 before the single division by N.
    """
    N = ds.N
    n_row = ds.n_row
    n_col = ds.n_col
    nu_a = int(np.dot(n_row, n_row)) / N
    nu_b = int(np.dot(n_col, n_col)) / N
    mu_row = np.bincount(ds.row_idx, weights=n_col[ds.col_idx], minlength=ds.R) / N
    mu_col = np.bincount(ds.col_idx, weights=n_row[ds.row_idx], minlength=ds.C) / N
    epsilon_n = max(
        1.0 / ds.R, 1.0 / ds.C, nu_a / N, nu_b / N, 1.0 / nu_a, 1.0 / nu_b,
        float(n_row.max()) / N, float(n_col.max()) / N,
    )
    return IncidenceSummary(
        n_row=n_row, n_col=n_col, N=N, nu_a=nu_a, nu_b=nu_b,
        mu_row=_readonly(mu_row), mu_col=_readonly(mu_col), epsilon_n=epsilon_n,
    )


def nu_a_size_biased(ds: TripletDataset) -> float:
    """nu_A read as the average number of row neighbors of an observation"""
    return float(np.mean(ds.n_row[ds.row_idx]))
