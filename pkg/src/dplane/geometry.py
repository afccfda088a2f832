"""Frames, Haar-random subspaces, projections, and the canonical relation.

A d-dimensional subspace of R^n is represented by an orthonormal Frame
(an n x d matrix of columns); an affine d-plane adds an offset lying in
the orthogonal complement of the frame's span. Subspace representatives
are non-unique -- any rotation of the columns spans the same subspace --
so every consumer must be invariant under column rotation.

All sampling is driven by an explicit numpy Generator; there is no
hidden global state.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ORTHO_TOL",
    "Frame",
    "AffinePlane",
    "CanonicalRelationPoint",
    "haar_orthogonal",
    "sample_subspace",
    "sample_subspace_in_complement",
    "project",
    "complement_part",
    "canonical_relation_point",
    "check_lambda_descriptions",
]

# Construction tolerance for orthonormality / orthogonality invariants.
ORTHO_TOL = 1e-10


def _as_locked_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Frame:
    """Orthonormal basis of a d-dimensional subspace of R^n.

    Parameters
    ----------
    columns : (n, d) array
        Orthonormal columns spanning the subspace; validated to satisfy
        ||columns^T columns - I_d||_max <= 1e-10 with 1 <= d < n.
    """

    columns: np.ndarray

    def __post_init__(self) -> None:
        cols = _as_locked_array(self.columns, "frame columns")
        if cols.ndim != 2:
            raise ValueError(f"frame columns must be a 2-d array, got shape {cols.shape}")
        n, d = cols.shape
        if not 1 <= d < n:
            raise ValueError(f"need 1 <= d < n, got d={d}, n={n}")
        gram = cols.T @ cols
        if np.max(np.abs(gram - np.eye(d))) > ORTHO_TOL:
            raise ValueError("frame columns are not orthonormal within 1e-10")
        object.__setattr__(self, "columns", cols)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def sub_dim(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class AffinePlane:
    """Affine d-plane: a Frame plus an offset in the frame's orthocomplement."""

    frame: Frame
    offset: np.ndarray

    def __post_init__(self) -> None:
        off = _as_locked_array(self.offset, "plane offset")
        if off.shape != (self.frame.ambient_dim,):
            raise ValueError(
                f"offset shape {off.shape} does not match ambient dimension "
                f"{self.frame.ambient_dim}"
            )
        scale = max(1.0, float(np.linalg.norm(off)))
        if np.max(np.abs(self.frame.columns.T @ off)) > ORTHO_TOL * scale:
            raise ValueError("plane offset must be orthogonal to the frame columns")
        object.__setattr__(self, "offset", off)


@dataclass(frozen=True)
class CanonicalRelationPoint:
    """One point of the transform's canonical relation.

    Pairs a cotangent element over the affine plane manifold -- the plane
    itself plus d+1 covector components, all lying in the plane's normal
    space -- with a base cotangent element (y, eta) over R^n.
    """

    plane: AffinePlane
    covector: np.ndarray  # (d + 1, n); rows eta_1 .. eta_d, xi
    base_point: np.ndarray
    base_covector: np.ndarray

    def __post_init__(self) -> None:
        n = self.plane.frame.ambient_dim
        d = self.plane.frame.sub_dim
        cov = _as_locked_array(self.covector, "covector")
        y = _as_locked_array(self.base_point, "base point")
        eta = _as_locked_array(self.base_covector, "base covector")
        if cov.shape != (d + 1, n):
            raise ValueError(f"covector must have shape {(d + 1, n)}, got {cov.shape}")
        if y.shape != (n,) or eta.shape != (n,):
            raise ValueError("base point/covector dimension mismatch")
        eta_norm = float(np.linalg.norm(eta))
        if eta_norm <= ORTHO_TOL:
            raise ValueError("base covector must be nonzero")
        cols = self.plane.frame.columns
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov @ cols)) > ORTHO_TOL * scale:
            raise ValueError("covector components must lie in the frame's normal space")
        if np.max(np.abs(cols.T @ eta)) > ORTHO_TOL * eta_norm:
            raise ValueError("base covector must be orthogonal to the frame columns")
        object.__setattr__(self, "covector", cov)
        object.__setattr__(self, "base_point", y)
        object.__setattr__(self, "base_covector", eta)


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an n x n orthogonal matrix from the Haar distribution on O(n).

    A standard-normal matrix is QR-factorized and the sign ambiguity is
    fixed by forcing a positive diagonal on the triangular factor, which
    makes the law exactly rotation invariant.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return haar_orthogonal_batch(n, 1, rng)[0]


def haar_orthogonal_batch(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Batched haar_orthogonal: returns a (count, n, n) stack."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    g = rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    signs = np.where(diag < 0.0, -1.0, 1.0)
    return q * signs[:, None, :]


def sample_subspace(d: int, n: int, rng: np.random.Generator) -> Frame:
    """Haar-random d-dimensional subspace of R^n, as an orthonormal Frame."""
    if not 1 <= d < n:
        raise ValueError(f"need 1 <= d < n, got d={d}, n={n}")
    return Frame(haar_orthogonal(n, rng)[:, :d])


def subspace_with_complement_batch(
    d: int, n: int, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Batch of Haar subspace frames together with orthocomplement bases.

    Returns (count, n, d) frame columns and (count, n, n-d) complement
    columns; the two blocks of each sample assemble to an orthogonal
    matrix. This is the sampling primitive of the Monte Carlo engines.
    """
    if not 1 <= d < n:
        raise ValueError(f"need 1 <= d < n, got d={d}, n={n}")
    q = haar_orthogonal_batch(n, count, rng)
    return q[:, :, :d], q[:, :, d:]


def complement_basis(direction: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the hyperplane normal to a vector.

    Built from the Householder reflector exchanging the last coordinate
    axis with the normalized direction; the first n-1 reflector columns
    span the orthocomplement. Deterministic, so sampling pipelines built
    on it are reproducible under a fixed seed.
    """
    v = np.asarray(direction, dtype=float)
    if v.ndim != 1 or v.shape[0] < 2:
        raise ValueError("direction must be a vector of dimension >= 2")
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("direction must be nonzero and finite")
    n = v.shape[0]
    u = v / norm
    w = u.copy()
    # Stable Householder: push the last coordinate away from cancellation.
    w[n - 1] += 1.0 if u[n - 1] >= 0.0 else -1.0
    h = np.eye(n) - 2.0 * np.outer(w, w) / float(w @ w)
    return h[:, : n - 1]


def sample_subspace_in_complement(
    d: int, n: int, xi: np.ndarray, rng: np.random.Generator
) -> Frame:
    """Haar-random d-frame inside the hyperplane orthogonal to xi.

    The hyperplane gets the deterministic basis from complement_basis,
    the frame is drawn Haar in dimension n-1 and mapped up. Every column
    of the result is orthogonal to xi within 1e-10 * |xi|.
    """
    if not 1 <= d <= n - 1:
        raise ValueError(f"need 1 <= d <= n-1, got d={d}, n={n}")
    basis = complement_basis(np.asarray(xi, dtype=float))
    inner = haar_orthogonal(n - 1, rng)[:, :d]
    return Frame(basis @ inner)


def project(frame: Frame, x: np.ndarray) -> np.ndarray:
    """Orthogonal projection of x onto the frame's span."""
    x = np.asarray(x, dtype=float)
    if x.shape != (frame.ambient_dim,):
        raise ValueError(
            f"vector shape {x.shape} does not match ambient dimension {frame.ambient_dim}"
        )
    cols = frame.columns
    return cols @ (cols.T @ x)


def complement_part(frame: Frame, x: np.ndarray) -> np.ndarray:
    """Component of x in the orthocomplement of the frame's span."""
    x = np.asarray(x, dtype=float)
    return x - project(frame, x)


def canonical_relation_point(
    frame: Frame, y: np.ndarray, eta: np.ndarray
) -> CanonicalRelationPoint:
    """Canonical-relation point generated by (frame, y, eta).

    For eta a nonzero covector normal to the frame's span, the plane is
    (span, y minus its in-span part), the plane-side covector components
    are (y . omega_j) eta for each column omega_j followed by eta itself,
    and the base element is (y, eta).
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    n, d = frame.columns.shape
    if y.shape != (n,) or eta.shape != (n,):
        raise ValueError("y and eta must match the frame's ambient dimension")
    eta_norm = float(np.linalg.norm(eta))
    if eta_norm <= ORTHO_TOL:
        raise ValueError("eta must be nonzero")
    if np.max(np.abs(frame.columns.T @ eta)) > ORTHO_TOL * eta_norm:
        raise ValueError("eta must be orthogonal to the frame columns")
    coeffs = frame.columns.T @ y  # y . omega_j
    plane = AffinePlane(frame, y - frame.columns @ coeffs)
    covector = np.empty((d + 1, n))
    covector[:d] = coeffs[:, None] * eta[None, :]
    covector[d] = eta
    return CanonicalRelationPoint(plane, covector, y, eta)


def check_lambda_descriptions(point: CanonicalRelationPoint, tol: float = 1e-9) -> bool:
    """Check a point against all three parametrizations of the relation.

    (a) the plane offset is the base point minus its in-span part;
    (b) the base covector is nonzero, normal to the span, and the
        plane-side covector equals eta (y . omega_1, ..., y . omega_d, 1);
    (c) some in-plane coordinates t reproduce the base point from the
        plane, and the final covector row equals the base covector.
    Returns False on any violation instead of raising.
    """
    cols = point.plane.frame.columns
    n, d = cols.shape
    y = point.base_point
    eta = point.base_covector
    y_scale = max(1.0, float(np.linalg.norm(y)))
    eta_norm = float(np.linalg.norm(eta))
    cov_scale = max(1.0, y_scale * eta_norm)

    # (a) offset matches the normal part of the base point
    if np.max(np.abs(point.plane.offset - (y - cols @ (cols.T @ y)))) > tol * y_scale:
        return False

    # (b) eta in the normal space, nonzero, and covector rows built from it
    if eta_norm <= tol:
        return False
    if np.max(np.abs(cols.T @ eta)) > tol * eta_norm:
        return False
    coeffs = cols.T @ y
    expected = np.vstack([coeffs[:, None] * eta[None, :], eta[None, :]])
    if np.max(np.abs(point.covector - expected)) > tol * cov_scale:
        return False

    # (c) in-plane coordinates recover y from the plane, xi row equals eta
    t = cols.T @ (y - point.plane.offset)
    if np.max(np.abs(point.plane.offset + cols @ t - y)) > tol * y_scale:
        return False
    xi = point.covector[d]
    if np.max(np.abs(xi - eta)) > tol * max(1.0, eta_norm):
        return False
    if np.max(np.abs(point.covector[:d] - t[:, None] * xi[None, :])) > tol * cov_scale:
        return False
    return True
