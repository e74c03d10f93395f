import pathlib

import pytest

from qrmap.edc import derive_region_labels
from qrmap.operators import load_tables

DATA = pathlib.Path(__file__).resolve().parents[1] / "src/qrmap/data/edc_tables.txt"


@pytest.fixture(scope="session")
def labeling():
    return derive_region_labels()


@pytest.fixture(scope="session")
def tables():
    table, lab = load_tables(DATA)
    return table, lab
