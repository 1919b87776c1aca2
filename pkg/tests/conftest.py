"""
Shared fixtures
"""
import numpy as np
import pytest

from schemas.variance import VarianceComponents
from services.dataset import TripletDataset, incidence_summary

D1_TEXT = "row,col,value\nr1,c1,1\nr1,c2,2\nr2,c1,3\nr2,c2,4\n"

D1_LABELED_TEXT = (
    "row,col,value,label\n"
    "r1,c1,1,Sun\n"
    "r1,c2,2,Tue\n"
    "r2,c1,3,Sun\n"
    "r2,c2,4,Tue\n"
)


@pytest.fixture
def d1() -> TripletDataset:
    return TripletDataset.from_arrays([0, 0, 1, 1], [0, 1, 0, 1], [1.0, 2.0, 3.0, 4.0],
                                      row_keys=["r1", "r2"], col_keys=["c1", "c2"])


@pytest.fixture
def d1_summary(d1):
    return incidence_summary(d1)


@pytest.fixture
def d1_labeled() -> TripletDataset:
    return TripletDataset.from_arrays([0, 0, 1, 1], [0, 1, 0, 1], [1.0, 2.0, 3.0, 4.0],
                                      labels=["Sun", "Tue", "Sun", "Tue"],
                                      row_keys=["r1", "r2"], col_keys=["c1", "c2"])


@pytest.fixture
def unit_components() -> VarianceComponents:
    return VarianceComponents.homogeneous(1.0, 1.0, 1.0)


@pytest.fixture
def d1_file(tmp_path):
    path = tmp_path / "d1.csv"
    path.write_text(D1_TEXT)
    return path


@pytest.fixture
def d1_labeled_file(tmp_path):
    path = tmp_path / "d1_labeled.csv"
    path.write_text(D1_LABELED_TEXT)
    return path


@pytest.fixture
def sparse_grid() -> TripletDataset:
    """3 x 4 pattern with uneven counts"""
    rows = [0, 0, 0, 1, 1, 2, 2, 2]
    cols = [0, 1, 3, 1, 2, 0, 2, 3]
    values = np.array([0.5, -1.0, 2.0, 3.5, 0.0, 1.25, -2.0, 4.0])
    return TripletDataset.from_arrays(rows, cols, values)
