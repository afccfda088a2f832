"""Uniformly sampled scalar fields on n-dimensional boxes, plus file IO.

The binary field format is little-endian: magic ``DPLF``, version u32,
ambient dimension u32, the per-axis sizes as u32, one f64 spacing shared
by all axes, the f64 origin coordinates, then the samples as f64 in
C (lexicographic) order.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .phantoms import GaussianMixture, eval_mixture_many

__all__ = [
    "GridField",
    "grid_axes",
    "grid_points",
    "centered_origin",
    "sample_mixture",
    "interpolate",
    "write_field",
    "read_field",
    "write_pgm",
    "central_slice",
]

_MAGIC = b"DPLF"
_VERSION = 1


@dataclass(frozen=True)
class GridField:
    """Scalar samples on a uniform n-dimensional grid.

    Sizes must be even and at least 8 on every axis (FFT-friendly), the
    spacing is shared by all axes, and the sample at multi-index j sits
    at origin + j * spacing.
    """

    values: np.ndarray
    spacing: float
    origin: np.ndarray

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        origin = np.array(self.origin, dtype=float)
        if values.ndim < 1:
            raise ValueError("field values must have at least one axis")
        if any(s < 8 or s % 2 for s in values.shape):
            raise ValueError(f"grid sizes must be even and >= 8, got {values.shape}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if origin.shape != (values.ndim,):
            raise ValueError("origin length must match the number of axes")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(origin)):
            raise ValueError("field values and origin must be finite")
        values.setflags(write=False)
        origin.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ambient_dim(self) -> int:
        return self.values.ndim


def grid_axes(dims, spacing: float, origin) -> list[np.ndarray]:
    """Per-axis coordinate arrays of the grid."""
    origin = np.asarray(origin, dtype=float)
    return [origin[a] + spacing * np.arange(dims[a]) for a in range(len(dims))]


def grid_points(dims, spacing: float, origin) -> np.ndarray:
    """All grid points as an (N, n) array in C (lexicographic) order."""
    axes = grid_axes(dims, spacing, origin)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def centered_origin(dims, spacing: float) -> np.ndarray:
    """Origin placing the box symmetrically about 0 with 0 on the grid."""
    return np.array([-(s // 2) * spacing for s in dims], dtype=float)


def sample_mixture(f: GaussianMixture, dims, spacing: float, origin) -> GridField:
    """Sample an analytic mixture onto a grid."""
    pts = grid_points(dims, spacing, origin)
    values = eval_mixture_many(f, pts).reshape(tuple(dims))
    return GridField(values, spacing, np.asarray(origin, dtype=float))


def interpolate(field: GridField, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of the field at arbitrary points.

    Points outside the sampled box evaluate to 0 (the fields of interest
    are compactly supported relative to their grids).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None, :]
    n = field.ambient_dim
    if points.shape[-1] != n:
        raise ValueError(f"points must have {n} coordinates")
    u = (points - field.origin) / field.spacing
    base = np.floor(u).astype(np.int64)
    frac = u - base

    dims = np.array(field.dims, dtype=np.int64)
    flat = field.values.reshape(-1)
    strides = np.ones(n, dtype=np.int64)
    for a in range(n - 2, -1, -1):
        strides[a] = strides[a + 1] * dims[a + 1]

    out = np.zeros(points.shape[0])
    for corner in range(2**n):
        bits = np.array([(corner >> a) & 1 for a in range(n)], dtype=np.int64)
        idx = base + bits
        inside = np.all((idx >= 0) & (idx < dims), axis=1)
        weight = np.prod(np.where(bits, frac, 1.0 - frac), axis=1)
        lin = np.clip(idx, 0, dims - 1) @ strides
        out += np.where(inside, weight * flat[lin], 0.0)
    return out


def write_field(field: GridField, path) -> None:
    """Serialize a GridField to the binary field format."""
    n = field.ambient_dim
    header = struct.pack(
        f"<4sII{n}Id{n}d",
        _MAGIC,
        _VERSION,
        n,
        *field.dims,
        field.spacing,
        *field.origin.tolist(),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path) -> GridField:
    """Read a GridField from the binary field format."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise ValueError("not a DPLF field file (bad magic)")
    version, n = struct.unpack_from("<II", blob, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported DPLF version {version}")
    offset = 12
    dims = struct.unpack_from(f"<{n}I", blob, offset)
    offset += 4 * n
    (spacing,) = struct.unpack_from("<d", blob, offset)
    offset += 8
    origin = np.array(struct.unpack_from(f"<{n}d", blob, offset))
    offset += 8 * n
    count = int(np.prod(dims))
    values = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
    return GridField(values.reshape(dims).astype(float), spacing, origin)


def central_slice(field: GridField) -> np.ndarray:
    """2-d view for rendering: the field itself, or its central plane in 3-d."""
    if field.ambient_dim == 2:
        return field.values
    if field.ambient_dim == 3:
        return field.values[:, :, field.dims[2] // 2]
    raise ValueError(f"no slice rendering for dimension {field.ambient_dim}")


def write_pgm(field: GridField, path) -> None:
    """Write an 8-bit binary PGM of the field (central plane in 3-d).

    Values are scaled linearly so the minimum maps to 0 and the maximum
    to 255; a constant field renders as black.
    """
    plane = central_slice(field)
    lo = float(plane.min())
    hi = float(plane.max())
    if hi > lo:
        scaled = np.round((plane - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(plane)
    data = scaled.astype(np.uint8)
    height, width = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
