import numpy as np
import pytest

from anisotv.exceptions import InvalidInputError
from anisotv.grid import GridSpec, ScalarField, VectorField
from anisotv.io import load_field, save_field, write_pbm, write_pgm


def test_scalar_round_trip(tmp_path, rng):
    mask = rng.random((12, 9)) < 0.8
    g = GridSpec((12, 9), 0.1, origin=(-0.3, 0.2), mask=mask)
    f = ScalarField(g, rng.standard_normal(g.shape))
    save_field(tmp_path / "f.bin", f)
    back = load_field(tmp_path / "f.bin")
    assert isinstance(back, ScalarField)
    np.testing.assert_array_equal(back.values, f.values)
    np.testing.assert_array_equal(back.grid.mask, g.mask)
    assert back.grid.spacing == 0.1 and back.grid.origin == (-0.3, 0.2)


def test_vector_round_trip_3d(tmp_path, rng):
    g = GridSpec.regular(5, dim=3)
    z = VectorField(g, rng.standard_normal((3,) + g.shape))
    save_field(tmp_path / "z.bin", z)
    back = load_field(tmp_path / "z.bin")
    assert isinstance(back, VectorField)
    np.testing.assert_array_equal(back.values, z.values)


def test_rejects_foreign_file(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"hello\nworld\n")
    with pytest.raises(InvalidInputError):
        load_field(tmp_path / "x.bin")


def test_pgm(tmp_path):
    g = GridSpec.regular(4)
    vals = np.arange(16.0).reshape(4, 4)
    write_pgm(tmp_path / "a.pgm", ScalarField(g, vals))
    data = (tmp_path / "a.pgm").read_bytes()
    assert data.startswith(b"P5\n4 4\n255\n")
    img = np.frombuffer(data[len(b"P5\n4 4\n255\n"):], np.uint8).reshape(4, 4)
    assert img.min() == 0 and img.max() == 255
    # the top-left pixel is x = 0, largest y
    assert img[0, 0] == round(255 * 3 / 15)
    with pytest.raises(InvalidInputError):
        write_pgm(tmp_path / "b.pgm", ScalarField(GridSpec.regular(3, dim=3), np.zeros((3, 3, 3))))


def test_pbm(tmp_path):
    mask = np.zeros((3, 2), bool)
    mask[0, 1] = True
    write_pbm(tmp_path / "m.pbm", mask)
    lines = (tmp_path / "m.pbm").read_text().splitlines()
    assert lines == ["P1", "3 2", "1 0 0", "0 0 0"]
    with pytest.raises(InvalidInputError):
        write_pbm(tmp_path / "n.pbm", np.zeros(3, bool))
