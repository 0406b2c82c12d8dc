"""Field serialization round trips."""

import numpy as np
import pytest

from kgmvar.field_io import (
    read_csv,
    read_structured_points,
    write_csv,
    write_structured_points,
)
from kgmvar.grid import GridError, build_domain, field_from_function


def _sample(dim):
    if dim == 2:
        d = build_domain(2, (1.0, 2.0), (5, 7))
        return field_from_function(d, lambda x, y: np.sin(x) * np.cos(y) + 1e-7 * x)
    d = build_domain(3, (1.0, 1.5, 0.5), (3, 4, 5))
    return field_from_function(d, lambda x, y, z: x * y - z**2 + 0.25)


@pytest.mark.parametrize("dim", [2, 3])
def test_csv_round_trip_bit_exact(tmp_path, dim):
    f = _sample(dim)
    path = tmp_path / "field.csv"
    write_csv(f, path)
    g = read_csv(path)
    assert g.domain.shape == f.domain.shape
    assert np.allclose(g.domain.spacing, f.domain.spacing, rtol=1e-15)
    assert np.array_equal(g.values, f.values)


@pytest.mark.parametrize("dim", [2, 3])
def test_structured_points_round_trip_bit_exact(tmp_path, dim):
    f = _sample(dim)
    path = tmp_path / "field.vtk"
    write_structured_points(f, path)
    g = read_structured_points(path)
    assert g.domain.shape == f.domain.shape
    assert np.array_equal(g.values, f.values)


def test_csv_header_names(tmp_path):
    f = _sample(2)
    path = tmp_path / "field.csv"
    write_csv(f, path)
    header = path.read_text().splitlines()[0]
    assert header == "i,j,x,y,value"


def test_structured_points_header(tmp_path):
    f = _sample(2)
    path = tmp_path / "field.vtk"
    write_structured_points(f, path, name="u")
    text = path.read_text()
    assert "DATASET STRUCTURED_POINTS" in text
    assert "DIMENSIONS 7 9 1" in text
    assert "SCALARS u double 1" in text


def test_read_rejects_garbage(tmp_path):
    path = tmp_path / "junk.vtk"
    path.write_text("not a field file\n")
    with pytest.raises(GridError):
        read_structured_points(path)


def test_files_newline_terminated(tmp_path):
    f = _sample(2)
    for writer, name in ((write_csv, "a.csv"), (write_structured_points, "a.vtk")):
        path = tmp_path / name
        writer(f, path)
        assert path.read_bytes().endswith(b"\n")
