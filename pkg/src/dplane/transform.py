"""Forward plane transform, Monte Carlo backprojection, normal operator.

The adjoint of the plane transform is an invariant integral over the
manifold of subspaces, scaled by the Grassmannian volume. It is
estimated here by Haar Monte Carlo: subspaces are drawn in fixed-size
blocks, each block from its own deterministically derived random
substream, and block results are merged in block order. Values are
therefore bit-identical for a fixed seed and sample count, regardless
of how many worker threads execute the blocks.
"""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constants import grassmannian_volume
from .fields import GridField, grid_points
from .geometry import (
    AffinePlane,
    Frame,
    complement_basis,
    subspace_with_complement_batch,
)
from .phantoms import GaussianMixture, dplane_closed_form

__all__ = [
    "BLOCK_SAMPLES",
    "McEstimate",
    "SinogramFunction",
    "forward_analytic",
    "forward_grid",
    "forward_grid_sinogram",
    "backproject_mc",
    "backproject_points",
    "backproject_field",
    "backproject_quadrature",
    "normal_operator",
    "normal_field",
    "adjointness_check",
]

# Samples drawn per random substream. Fixed (not tied to the worker
# count) so that results depend only on the seed and sample count.
BLOCK_SAMPLES = 4096

# Upper bound on elements of the (frames x points) value matrix held at
# once; frames are processed in sub-chunks honoring this bound.
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class McEstimate:
    """A Monte Carlo value with its standard error and provenance."""

    value: float
    std_error: float
    samples: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.std_error < 0:
            raise ValueError("standard error must be nonnegative")
        if self.samples < 2:
            raise ValueError("an estimate needs at least 2 samples")


@dataclass(frozen=True)
class SinogramFunction:
    """A function on affine d-planes in R^n.

    ``eval_plane`` is the pointwise contract; the function must be
    bounded and continuous along sampled planes. Sinograms produced by
    forward_analytic carry their source mixture, and filtered sinograms
    a dedicated batch evaluator, which unlock the vectorized paths used
    by the Monte Carlo engines; anything else falls back to plane-by-
    plane evaluation.
    """

    d: int
    n: int
    provenance: str
    eval_plane: Callable[[AffinePlane], float]
    mixture: GaussianMixture | None = None
    batch_eval: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.d < self.n:
            raise ValueError(f"need 1 <= d < n, got d={self.d}, n={self.n}")
        if self.provenance not in ("analytic", "grid"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __call__(self, plane: AffinePlane) -> float:
        return float(self.eval_plane(plane))

    def projected_values(self, columns: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Values phi(sigma_b, x_p - proj_b x_p) as a (frames, points) array."""
        if self.batch_eval is not None:
            return self.batch_eval(columns, points)
        if self.mixture is not None:
            return _analytic_projected_values(self.mixture, self.d, columns, points)
        return _generic_projected_values(self, columns, points)


def _analytic_projected_values(
    mixture: GaussianMixture, d: int, columns: np.ndarray, points: np.ndarray
) -> np.ndarray:
    # One GEMM against all frame columns at once, grouped so each column
    # index occupies a contiguous slab; everything after runs as fused
    # in-place passes over (points, frames) arrays.
    count = columns.shape[0]
    p = points.shape[0]
    flat_cols = columns.transpose(1, 2, 0).reshape(columns.shape[1], d * count)
    out = np.zeros((p, count))
    for t in mixture.terms:
        diff = points - t.center
        d2 = np.einsum("pn,pn->p", diff, diff)
        proj = diff @ flat_cols
        proj *= proj
        r2 = proj[:, :count]
        for k in range(1, d):
            r2 += proj[:, k * count : (k + 1) * count]
        r2 -= d2[:, None]
        r2 *= 1.0 / (2.0 * t.width**2)
        np.exp(r2, out=r2)
        pref = t.amplitude * (2.0 * np.pi * t.width**2) ** (d / 2.0)
        if len(mixture.terms) == 1:
            r2 *= pref
            return r2.T
        out += pref * r2
    return out.T


def _generic_projected_values(
    phi: SinogramFunction, columns: np.ndarray, points: np.ndarray
) -> np.ndarray:
    out = np.empty((columns.shape[0], points.shape[0]))
    for b in range(columns.shape[0]):
        frame = Frame(columns[b])
        proj = frame.columns @ (frame.columns.T @ points.T)
        offsets = points - proj.T
        for p in range(points.shape[0]):
            out[b, p] = phi.eval_plane(AffinePlane(frame, offsets[p]))
    return out


def forward_analytic(f: GaussianMixture, d: int) -> SinogramFunction:
    """Exact plane transform of a Gaussian mixture (no discretization)."""
    n = f.ambient_dim
    if not 1 <= d < n:
        raise ValueError(f"need 1 <= d < n, got d={d}, n={n}")
    return SinogramFunction(
        d=d,
        n=n,
        provenance="analytic",
        eval_plane=lambda plane: dplane_closed_form(f, plane),
        mixture=f,
    )


def _laplacian_polynomial(power: int, m: int, alpha: float) -> np.ndarray:
    """Coefficients (ascending, in q = |u-c|^2) of the polynomial factor of
    (-Laplacian_m)^power applied to exp(-alpha q).

    Uses the radial form Delta F(q) = 4 q F'' + 2 m F' for F(q) = p(q)
    exp(-alpha q), which maps polynomials to polynomials.
    """
    p = np.array([1.0])
    for _ in range(power):
        dp = np.arange(1, p.size) * p[1:] if p.size > 1 else np.zeros(0)
        ddp = np.arange(1, dp.size) * dp[1:] if dp.size > 1 else np.zeros(0)
        new = np.zeros(p.size + 1)
        new[1 : 1 + ddp.size] += 4.0 * ddp
        new[1 : 1 + dp.size] -= 8.0 * alpha * dp
        new[1 : 1 + p.size] += 4.0 * alpha**2 * p
        new[: dp.size] += 2.0 * m * dp
        new[: p.size] -= 2.0 * m * alpha * p
        p = -new
    return p


def plane_filtered_sinogram(f: GaussianMixture, d: int) -> SinogramFunction:
    """Exact transform of f with the |xi|^d filter applied per plane.

    The ambient fractional Laplacian commutes with backprojection as the
    same power of the Laplacian in the offset variable of each plane
    (the spectrum of a plane profile lives in the plane's normal space).
    For even d that per-plane filter of a Gaussian profile is an
    explicit polynomial times the same Gaussian, so backprojecting this
    sinogram reproduces the sharpened normal operator without any grid
    transform. Odd powers are not representable in closed form here.
    """
    n = f.ambient_dim
    if not 1 <= d < n:
        raise ValueError(f"need 1 <= d < n, got d={d}, n={n}")
    if d % 2:
        raise ValueError("per-plane filtering needs an even power for Gaussian profiles")
    m = n - d
    polys = [
        (t, _laplacian_polynomial(d // 2, m, 1.0 / (2.0 * t.width**2))) for t in f.terms
    ]

    def eval_plane(plane: AffinePlane) -> float:
        cols = plane.frame.columns
        total = 0.0
        for t, poly in polys:
            c = t.center - cols @ (cols.T @ t.center)
            q = float(np.sum((plane.offset - c) ** 2))
            pref = t.amplitude * (2.0 * np.pi * t.width**2) ** (d / 2.0)
            total += pref * _polyval(poly, q) * np.exp(-q / (2.0 * t.width**2))
        return total

    def batch_eval(columns: np.ndarray, points: np.ndarray) -> np.ndarray:
        count = columns.shape[0]
        p = points.shape[0]
        flat_cols = columns.transpose(1, 2, 0).reshape(n, d * count)
        out = None
        for t, poly in polys:
            diff = points - t.center
            d2 = np.einsum("pn,pn->p", diff, diff)
            proj = diff @ flat_cols
            proj *= proj
            q = proj[:, :count]
            np.negative(q, out=q)
            for k in range(1, d):
                q -= proj[:, k * count : (k + 1) * count]
            q += d2[:, None]
            pref = t.amplitude * (2.0 * np.pi * t.width**2) ** (d / 2.0)
            factor = _polyval(pref * poly, q)
            q *= -1.0 / (2.0 * t.width**2)
            np.exp(q, out=q)
            factor *= q
            out = factor if out is None else out + factor
        return out.T

    return SinogramFunction(
        d=d, n=n, provenance="analytic", eval_plane=eval_plane, batch_eval=batch_eval
    )


def _polyval(coeffs: np.ndarray, q) -> np.ndarray:
    out = np.zeros_like(q) + coeffs[-1]
    for c in coeffs[-2::-1]:
        out *= q
        out += c
    return out


def forward_grid(field: GridField, plane: AffinePlane, step: float, radius: float) -> float:
    """Plane integral of a sampled field by in-plane trapezoid quadrature.

    The field is interpolated multilinearly on the patch
    {sum_j t_j omega_j + offset : |t_j| <= radius} with roughly the
    requested in-plane spacing; samples outside the grid contribute 0.
    """
    if step <= 0 or radius <= 0:
        raise ValueError("step and radius must be positive")
    cols = plane.frame.columns
    if cols.shape[0] != field.ambient_dim:
        raise ValueError("plane and field dimensions do not match")
    d = cols.shape[1]
    m = int(round(2.0 * radius / step)) + 1
    t = np.linspace(-radius, radius, m)
    mesh = np.meshgrid(*([t] * d), indexing="ij")
    coords = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    pts = plane.offset + coords @ cols.T
    from .fields import interpolate

    vals = interpolate(field, pts).reshape((m,) * d)
    for _ in range(d):
        vals = np.trapezoid(vals, t, axis=-1)
    return float(vals)


def forward_grid_sinogram(
    field: GridField, d: int, step: float, radius: float
) -> SinogramFunction:
    """Wrap a sampled field's grid-quadrature transform as a sinogram."""
    return SinogramFunction(
        d=d,
        n=field.ambient_dim,
        provenance="grid",
        eval_plane=lambda plane: forward_grid(field, plane, step, radius),
    )


# ---------------------------------------------------------------------------
# Monte Carlo engine


def _seed_of(rng) -> int | None:
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return None


def _spawn_streams(rng, count: int) -> list[np.random.Generator]:
    """Derive `count` independent generators deterministically from rng."""
    if isinstance(rng, (int, np.integer)):
        children = np.random.SeedSequence(int(rng)).spawn(count)
        return [np.random.default_rng(c) for c in children]
    if isinstance(rng, np.random.SeedSequence):
        return [np.random.default_rng(c) for c in rng.spawn(count)]
    if isinstance(rng, np.random.Generator):
        return list(rng.spawn(count))
    raise TypeError(f"rng must be an int seed, SeedSequence, or Generator, got {type(rng)}")


def _block_sizes(samples: int) -> list[int]:
    full, rest = divmod(samples, BLOCK_SAMPLES)
    sizes = [BLOCK_SAMPLES] * full
    if rest:
        sizes.append(rest)
    return sizes


def _map_blocks(worker, sizes, streams, threads: int) -> list:
    if threads <= 1:
        return [worker(size, gen) for size, gen in zip(sizes, streams)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, sizes, streams))


def _merge_moments(a, b):
    count_a, mean_a, m2_a = a
    count_b, mean_b, m2_b = b
    if count_a == 0:
        return b
    total = count_a + count_b
    delta = mean_b - mean_a
    mean = mean_a + delta * (count_b / total)
    m2 = m2_a + m2_b + delta * delta * (count_a * count_b / total)
    return total, mean, m2


def _welford_rows(values: np.ndarray):
    """Sequential mean/M2 over the rows of a (samples, points) array.

    Row-sequential so that a constant integrand yields exactly zero
    variance (each update sees delta == 0.0).
    """
    count = 0
    mean = np.zeros(values.shape[1])
    m2 = np.zeros(values.shape[1])
    for row in values:
        count += 1
        delta = row - mean
        mean = mean + delta / count
        m2 = m2 + delta * (row - mean)
    return count, mean, m2


def backproject_points(
    phi: SinogramFunction, points: np.ndarray, samples: int, rng, threads: int = 1
) -> list[McEstimate]:
    """Adjoint-transform estimates at several points from one sample pool.

    Every point is evaluated against the same Haar subspace samples, so
    the estimates are correlated but each carries a valid standard
    error. Equivalent to calling backproject_mc per point with the same
    seed, at a fraction of the cost.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != phi.n:
        raise ValueError(f"points must have {phi.n} coordinates")
    vol = grassmannian_volume(phi.d, phi.n)
    sizes = _block_sizes(samples)
    streams = _spawn_streams(rng, len(sizes))

    def worker(size: int, gen: np.random.Generator):
        cols, _ = subspace_with_complement_batch(phi.d, phi.n, size, gen)
        return _welford_rows(phi.projected_values(cols, points))

    moments = (0, np.zeros(points.shape[0]), np.zeros(points.shape[0]))
    for block in _map_blocks(worker, sizes, streams, threads):
        moments = _merge_moments(moments, block)
    count, mean, m2 = moments
    std = np.sqrt(m2 / (count - 1)) / np.sqrt(count)
    seed = _seed_of(rng)
    return [
        McEstimate(float(vol * mean[p]), float(vol * std[p]), count, seed)
        for p in range(points.shape[0])
    ]


def backproject_mc(phi: SinogramFunction, x: np.ndarray, samples: int, rng) -> McEstimate:
    """Monte Carlo estimate of the adjoint transform at one point.

    Averages phi(sigma, x - proj_sigma x) over Haar subspace samples and
    scales by the Grassmannian volume; the standard error is the sample
    standard deviation over the volume-scaled mean's samples.
    """
    return backproject_points(phi, np.asarray(x, dtype=float)[None, :], samples, rng)[0]


def backproject_field(
    phi: SinogramFunction,
    dims,
    spacing: float,
    origin,
    samples: int,
    rng,
    threads: int = 1,
) -> GridField:
    """Adjoint transform evaluated on a whole grid from one sample pool.

    Sharing the pool across grid points makes the Monte Carlo error a
    smooth field (correlated across points), which is what the spectral
    ratio estimators downstream want. Only the mean field is returned.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    pts = grid_points(dims, spacing, origin)
    vol = grassmannian_volume(phi.d, phi.n)
    sizes = _block_sizes(samples)
    streams = _spawn_streams(rng, len(sizes))
    chunk = max(1, _CHUNK_ELEMENTS // pts.shape[0])

    def worker(size: int, gen: np.random.Generator):
        cols, _ = subspace_with_complement_batch(phi.d, phi.n, size, gen)
        acc = np.zeros(pts.shape[0])
        for start in range(0, size, chunk):
            vals = phi.projected_values(cols[start : start + chunk], pts)
            acc += vals.sum(axis=0)
        return acc

    total = np.zeros(pts.shape[0])
    for part in _map_blocks(worker, sizes, streams, threads):
        total += part
    values = (vol / samples) * total
    return GridField(values.reshape(tuple(dims)), spacing, np.asarray(origin, dtype=float))


def normal_operator(
    f: GaussianMixture, d: int, x: np.ndarray, samples: int, rng
) -> McEstimate:
    """Backprojection of the exact forward transform: (R* R f)(x) by MC."""
    return backproject_mc(forward_analytic(f, d), x, samples, rng)


def normal_field(
    f: GaussianMixture, d: int, dims, spacing: float, origin, samples: int, rng,
    threads: int = 1,
) -> GridField:
    """(R* R f) sampled on a grid with a shared Haar pool."""
    return backproject_field(forward_analytic(f, d), dims, spacing, origin, samples, rng, threads)


def backproject_quadrature(phi: SinogramFunction, x: np.ndarray, resolution: int = 2048) -> float:
    """Deterministic quadrature of the adjoint at one point (n = 2 or 3).

    For n = 2 the subspace average is a midpoint rule over line angles in
    [0, pi); for n = 3 it is a Gauss-Legendre (polar) x midpoint
    (azimuth) product rule over directions, the direction spanning the
    subspace (d = 1) or its normal (d = 2). Used as an independent
    oracle for the Monte Carlo estimates.
    """
    x = np.asarray(x, dtype=float)
    vol = grassmannian_volume(phi.d, phi.n)
    if phi.n == 2:
        theta = (np.arange(resolution) + 0.5) * np.pi / resolution
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        cols = dirs[:, :, None]
        weights = np.full(resolution, 1.0 / resolution)
    elif phi.n == 3:
        polar = max(8, int(np.sqrt(resolution)))
        azimuth = 2 * polar
        nodes, gl_weights = np.polynomial.legendre.leggauss(polar)
        phi_grid = (np.arange(azimuth) + 0.5) * 2.0 * np.pi / azimuth
        ct, pg = np.meshgrid(nodes, phi_grid, indexing="ij")
        st = np.sqrt(1.0 - ct**2)
        dirs = np.stack([st * np.cos(pg), st * np.sin(pg), ct], axis=-1).reshape(-1, 3)
        weights = np.repeat(gl_weights / (2.0 * azimuth), azimuth)
        if phi.d == 1:
            cols = dirs[:, :, None]
        else:
            cols = np.stack([complement_basis(v) for v in dirs])
    else:
        raise ValueError("deterministic quadrature is provided for n = 2 and n = 3 only")
    vals = phi.projected_values(cols, x[None, :])[:, 0]
    return float(vol * (weights @ vals))


# ---------------------------------------------------------------------------
# Pairing (adjointness) check


@dataclass
class _BoundaryTracker:
    """Largest observed endpoint share of any axis integral."""

    worst: float = 0.0

    def update(self, edge: np.ndarray, total: np.ndarray) -> None:
        ratio = edge / np.maximum(total, 1e-300)
        self.worst = max(self.worst, float(ratio.max()))


def _axis_integrals(factors, nodes, weights, tracker: _BoundaryTracker):
    """Product over axes of 1-d quadratures of Gaussian-factor products.

    factors: list of ((samples, axes) centers array, width) pairs; the
    integrand on each axis is the product of the factors
    exp(-(v - center_k)^2 / (2 width^2)).
    """
    count = factors[0][0].shape[0]
    axes = factors[0][0].shape[1]
    out = np.ones(count)
    for k in range(axes):
        log_vals = np.zeros((count, nodes.shape[0]))
        for c, w in factors:
            log_vals -= (nodes[None, :] - c[:, k, None]) ** 2 / (2.0 * w**2)
        vals = np.exp(log_vals)
        total = vals @ weights
        tracker.update((vals[:, 0] + vals[:, -1]) * weights[0], total)
        out *= total
    return out


def _pairing_values(
    f: GaussianMixture,
    g: GaussianMixture,
    d: int,
    cols: np.ndarray,
    comp: np.ndarray,
    nodes: np.ndarray,
    weights: np.ndarray,
    side: str,
    tracker: _BoundaryTracker,
) -> np.ndarray:
    """Per-sample inner-integral values for one side of the pairing.

    side = "plane-function": integral over the subspace's normal space of
    (exact transform of f) x (transform of g), per sampled subspace.
    side = "point-function": integral over R^n of f x (transform of g
    evaluated at the projected argument), per sampled subspace. Both
    integrals factor per axis in subspace-adapted coordinates because
    every Gaussian involved is isotropic.
    """
    out = np.zeros(cols.shape[0])
    for tf in f.terms:
        for tg in g.terms:
            g_comp = (np.einsum("bnk,n->bk", comp, tg.center), tg.width)
            if side == "plane-function":
                f_comp = (np.einsum("bnk,n->bk", comp, tf.center), tf.width)
                pref = (
                    tf.amplitude
                    * tg.amplitude
                    * (2.0 * np.pi * tf.width**2) ** (d / 2.0)
                    * (2.0 * np.pi * tg.width**2) ** (d / 2.0)
                )
                out += pref * _axis_integrals([f_comp, g_comp], nodes, weights, tracker)
            else:
                f_plane = (np.einsum("bnk,n->bk", cols, tf.center), tf.width)
                f_comp = (np.einsum("bnk,n->bk", comp, tf.center), tf.width)
                pref = (
                    tf.amplitude
                    * tg.amplitude
                    * (2.0 * np.pi * tg.width**2) ** (d / 2.0)
                )
                in_plane = _axis_integrals([f_plane], nodes, weights, tracker)
                normal = _axis_integrals([f_comp, g_comp], nodes, weights, tracker)
                out += pref * in_plane * normal
    return out


def adjointness_check(
    f: GaussianMixture,
    phi: SinogramFunction,
    samples: int,
    rng,
    nodes_per_axis: int = 64,
    box_halfwidth: float | None = None,
    boundary_tol: float = 1e-6,
) -> tuple[McEstimate, McEstimate]:
    """Estimate both sides of the adjoint pairing identity.

    Returns Monte Carlo estimates of the pairing of the transform of f
    against phi over the affine-plane manifold, and of f against the
    backprojection of phi over R^n. The two sides use independent Haar
    sample pools, so their agreement (within combined standard errors)
    is a genuine statistical check, not an algebraic identity. The inner
    integrals are trapezoid quadratures on a box of the given halfwidth
    (default 8 x the widest term plus the largest center norm); if any
    axis integral picks up more than `boundary_tol` of its value at the
    box edge, the box is reported as too small.

    phi must carry an analytic mixture (see forward_analytic).
    """
    if phi.mixture is None:
        raise ValueError("adjointness_check requires an analytic sinogram")
    if phi.n != f.ambient_dim:
        raise ValueError("f and phi dimensions do not match")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    g = phi.mixture
    d, n = phi.d, phi.n

    if box_halfwidth is None:
        widest = max(t.width for t in (*f.terms, *g.terms))
        reach = max(float(np.linalg.norm(t.center)) for t in (*f.terms, *g.terms))
        box_halfwidth = 8.0 * widest + reach
    nodes = np.linspace(-box_halfwidth, box_halfwidth, nodes_per_axis)
    weights = np.full(nodes_per_axis, nodes[1] - nodes[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5

    vol = grassmannian_volume(d, n)
    sizes = _block_sizes(samples)
    lanes = _spawn_streams(rng, 2)
    seed = _seed_of(rng)
    results = []
    for lane, side in zip(lanes, ("plane-function", "point-function")):
        tracker = _BoundaryTracker()
        streams = _spawn_streams(lane, len(sizes))
        moments = (0, np.zeros(1), np.zeros(1))
        for size, gen in zip(sizes, streams):
            cols, comp = subspace_with_complement_batch(d, n, size, gen)
            vals = _pairing_values(f, g, d, cols, comp, nodes, weights, side, tracker)
            moments = _merge_moments(moments, _welford_rows(vals[:, None]))
        if tracker.worst > boundary_tol:
            raise ValueError(
                f"quadrature box too small: boundary contribution {tracker.worst:.2e} "
                f"exceeds {boundary_tol:.0e} of the axis integral"
            )
        count, mean, m2 = moments
        std = float(np.sqrt(m2[0] / (count - 1)) / np.sqrt(count))
        results.append(McEstimate(float(vol * mean[0]), vol * std, count, seed))
    return results[0], results[1]
