import numpy as np
import pytest

from dplane.fields import (
    GridField,
    centered_origin,
    central_slice,
    grid_points,
    interpolate,
    read_field,
    sample_mixture,
    write_field,
    write_pgm,
)
from dplane.phantoms import GaussianMixture, GaussianTerm


def small_field():
    rng = np.random.default_rng(41)
    return GridField(rng.standard_normal((8, 10)), 0.5, np.array([-2.0, -2.5]))


class TestGridFieldInvariants:
    def test_rejects_odd_sizes(self):
        with pytest.raises(ValueError):
            GridField(np.zeros((9, 8)), 1.0, np.zeros(2))

    def test_rejects_small_sizes(self):
        with pytest.raises(ValueError):
            GridField(np.zeros((4, 8)), 1.0, np.zeros(2))

    def test_rejects_bad_spacing_and_origin(self):
        with pytest.raises(ValueError):
            GridField(np.zeros((8, 8)), 0.0, np.zeros(2))
        with pytest.raises(ValueError):
            GridField(np.zeros((8, 8)), 1.0, np.zeros(3))

    def test_rejects_nonfinite(self):
        vals = np.zeros((8, 8))
        vals[0, 0] = np.inf
        with pytest.raises(ValueError):
            GridField(vals, 1.0, np.zeros(2))


def test_grid_points_lexicographic_order():
    pts = grid_points((8, 8), 0.5, np.array([0.0, 0.0]))
    # C order: the last axis varies fastest
    assert np.allclose(pts[0], [0.0, 0.0])
    assert np.allclose(pts[1], [0.0, 0.5])
    assert np.allclose(pts[8], [0.5, 0.0])


def test_centered_origin_contains_zero():
    origin = centered_origin((8, 12), 0.25)
    axes0 = origin[0] + 0.25 * np.arange(8)
    assert 0.0 in axes0
    assert np.allclose(origin, [-1.0, -1.5])


class TestInterpolation:
    def test_exact_at_grid_points(self):
        field = small_field()
        pts = grid_points(field.dims, field.spacing, field.origin)
        got = interpolate(field, pts)
        assert np.max(np.abs(got - field.values.reshape(-1))) <= 1e-12

    def test_linear_functions_reproduced(self):
        xs = np.linspace(0.0, 7.0, 8)
        ys = np.linspace(0.0, 9.0, 10)
        vals = 2.0 * xs[:, None] + 3.0 * ys[None, :] + 1.0
        field = GridField(vals, 1.0, np.zeros(2))
        rng = np.random.default_rng(42)
        pts = rng.uniform([0, 0], [7, 9], size=(50, 2))
        got = interpolate(field, pts)
        want = 2.0 * pts[:, 0] + 3.0 * pts[:, 1] + 1.0
        assert np.max(np.abs(got - want)) <= 1e-10

    def test_zero_outside_box(self):
        field = small_field()
        got = interpolate(field, np.array([[100.0, 0.0], [-50.0, -50.0]]))
        assert np.array_equal(got, [0.0, 0.0])


class TestFieldIo:
    def test_roundtrip(self, tmp_path):
        field = small_field()
        path = tmp_path / "f.dplf"
        write_field(field, path)
        back = read_field(path)
        assert back.dims == field.dims
        assert back.spacing == field.spacing
        assert np.array_equal(back.origin, field.origin)
        assert np.array_equal(back.values, field.values)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.dplf"
        path.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(ValueError, match="magic"):
            read_field(path)

    def test_header_layout(self, tmp_path):
        field = small_field()
        path = tmp_path / "f.dplf"
        write_field(field, path)
        blob = path.read_bytes()
        assert blob[:4] == b"DPLF"
        n = int.from_bytes(blob[8:12], "little")
        assert n == 2
        assert len(blob) == 12 + 4 * n + 8 + 8 * n + 8 * 80


class TestPgm:
    def test_header_and_size(self, tmp_path):
        field = small_field()
        path = tmp_path / "f.pgm"
        write_pgm(field, path)
        blob = path.read_bytes()
        header = b"P5\n10 8\n255\n"
        assert blob.startswith(header)
        assert len(blob) == len(header) + 80

    def test_constant_field_renders_black(self, tmp_path):
        field = GridField(np.full((8, 8), 3.0), 1.0, np.zeros(2))
        path = tmp_path / "c.pgm"
        write_pgm(field, path)
        data = path.read_bytes().split(b"255\n", 1)[1]
        assert set(data) == {0}

    def test_3d_central_slice(self):
        vals = np.zeros((8, 8, 8))
        vals[:, :, 4] = 1.0
        field = GridField(vals, 1.0, np.zeros(3))
        assert np.array_equal(central_slice(field), np.ones((8, 8)))


def test_sample_mixture_matches_eval():
    f = GaussianMixture((GaussianTerm(1.0, np.array([0.3, -0.1]), 0.8),))
    field = sample_mixture(f, (16, 16), 0.5, centered_origin((16, 16), 0.5))
    assert field.values[8, 8] == pytest.approx(
        np.exp(-(0.3**2 + 0.1**2) / (2 * 0.64)), rel=1e-12
    )
