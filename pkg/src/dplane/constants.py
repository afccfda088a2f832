"""Closed-form constants of the d-plane transform.

Everything in this module is a pure function of small integers: gamma
values, unit-sphere surface measures, rotation-group and Grassmannian
volumes, and the integer/rational bookkeeping (excess dimensions,
operator orders) attached to the normal operator of the transform.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "gamma_fn",
    "sphere_volume",
    "so_volume",
    "grassmannian_volume",
    "gamma_ratio_constant",
    "DimensionReport",
    "dimension_report",
]

# Relative tolerance for the internal agreement check between the two
# Grassmannian-volume expressions.
_VOLUME_AGREEMENT_RTOL = 1e-12


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments.

    Integer and half-integer arguments are evaluated by exact recursion
    from Gamma(1) = 1 and Gamma(1/2) = sqrt(pi); everything else falls
    back to the C library implementation, whose relative error is well
    below 1e-12 on [0.5, 30].
    """
    x = float(x)
    if not x > 0:
        raise ValueError(f"gamma_fn requires x > 0, got {x}")
    doubled = 2.0 * x
    if doubled == round(doubled):
        integral = doubled % 2 == 0
        acc = 1.0 if integral else math.sqrt(math.pi)
        base = 1.0 if integral else 0.5
        while base + 1.0 <= x:
            acc *= base
            base += 1.0
        return acc
    return math.gamma(x)


def sphere_volume(k: int) -> float:
    """Surface measure of the unit k-sphere in R^{k+1}.

    vol(S^k) = 2 pi^{(k+1)/2} / Gamma((k+1)/2); vol(S^0) = 2.
    """
    if k < 0:
        raise ValueError(f"sphere dimension must be >= 0, got {k}")
    return 2.0 * math.pi ** ((k + 1) / 2.0) / gamma_fn((k + 1) / 2.0)


def so_volume(n: int) -> float:
    """Volume of SO(n) under the Frobenius bi-invariant metric.

    Computed as prod_{k=1}^{n-1} 2^{k/2} vol(S^k); empty product for
    n = 1. This is the unique normalization under which the quotient
    expression for the Grassmannian volume matches the sphere-product
    expression (checked in grassmannian_volume, not assumed).
    """
    if n < 1:
        raise ValueError(f"so_volume requires n >= 1, got {n}")
    out = 1.0
    for k in range(1, n):
        out *= 2.0 ** (k / 2.0) * sphere_volume(k)
    return out


def _log_so_volume(n: int) -> float:
    # Log-space version so the quotient cross-check stays finite for large n.
    out = 0.0
    for k in range(1, n):
        out += (k / 2.0) * math.log(2.0)
        out += math.log(2.0) + ((k + 1) / 2.0) * math.log(math.pi) - math.lgamma((k + 1) / 2.0)
    return out


def _check_dn(d: int, n: int) -> None:
    if not (isinstance(d, int) and isinstance(n, int)):
        raise TypeError("d and n must be integers")
    if not 1 <= d < n:
        raise ValueError(f"need 1 <= d < n, got d={d}, n={n}")


def grassmannian_volume(d: int, n: int) -> float:
    """Volume of the Grassmannian of d-dimensional subspaces of R^n.

    Evaluates the sphere-product expression
    vol(S^{n-1}) ... vol(S^{n-d}) / (vol(S^{d-1}) ... vol(S^1))
    (empty denominator = 1 for d = 1), and cross-checks it against the
    quotient expression vol(SO(n)) / (2^{d(n-d)/2} vol(SO(d)) vol(SO(n-d)))
    to relative 1e-12 before returning.
    """
    _check_dn(d, n)
    num = 1.0
    for k in range(n - d, n):
        num *= sphere_volume(k)
    den = 1.0
    for k in range(1, d):
        den *= sphere_volume(k)
    value = num / den

    log_quotient = (
        _log_so_volume(n)
        - (d * (n - d) / 2.0) * math.log(2.0)
        - _log_so_volume(d)
        - _log_so_volume(n - d)
    )
    quotient = math.exp(log_quotient)
    if abs(quotient - value) > _VOLUME_AGREEMENT_RTOL * abs(value):
        raise ArithmeticError(
            f"Grassmannian volume expressions disagree at (d,n)=({d},{n}): "
            f"{value!r} vs {quotient!r}"
        )
    return value


def gamma_ratio_constant(d: int, n: int) -> float:
    """Candidate calibration factor (4 pi)^{d/2} Gamma(n/2) / Gamma((n-d)/2).

    Multiplying the Grassmannian volume by this factor yields the second
    candidate value for the normal-operator constant; the measurement
    pipeline reports both candidates against the measured value.
    """
    _check_dn(d, n)
    return (4.0 * math.pi) ** (d / 2.0) * gamma_fn(n / 2.0) / gamma_fn((n - d) / 2.0)


@dataclass(frozen=True)
class DimensionReport:
    """Integer and rational invariants of the transform at fixed (d, n).

    All fields regenerate from (d, n) alone: Grassmannian and affine
    Grassmannian dimensions, the dimension of the transform's canonical
    relation and of the composed intersection set, the intersection
    excess, and the operator orders (the Lagrangian-distribution order
    is an exact rational, quarter-integer valued).
    """

    d: int
    n: int
    dim_grassmannian: int
    dim_affine_grassmannian: int
    dim_lambda: int
    dim_E: int
    excess: int
    fio_order: Fraction
    psdo_order: int

    def __post_init__(self) -> None:
        if self.dim_E != 2 * self.n + self.excess:
            raise ValueError("intersection dimension inconsistent with excess")
        if self.excess < 0:
            raise ValueError("excess must be nonnegative")
        # Composition order bookkeeping: twice the transform's order plus
        # half the excess must land exactly on -d.
        m = 2 * self.fio_order + Fraction(self.excess, 2)
        if m != -self.d:
            raise ValueError(f"order chain broken: 2*{self.fio_order} + {self.excess}/2 = {m} != {-self.d}")


def dimension_report(d: int, n: int) -> DimensionReport:
    """Assemble the DimensionReport for (d, n), verifying the identities.

    The excess is recomputed from the codimension count
    excess = -dim(Lambda^T x Lambda) + codim(middle diagonal) + dim(E)
    in exact integer arithmetic and must agree with d(n-d-1).
    """
    _check_dn(d, n)
    dim_grassmannian = d * (n - d)
    dim_affine = (d + 1) * (n - d)
    dim_lambda = dim_affine + n
    excess = d * (n - d - 1)
    dim_e = 2 * n + excess

    # Independent route to the excess: codimension arithmetic of the
    # composed relation inside the product cotangent space.
    codim_middle = 2 * dim_affine
    excess_from_codims = -(2 * dim_lambda) + codim_middle + dim_e
    if excess_from_codims != excess:
        raise ArithmeticError(
            f"excess mismatch at (d,n)=({d},{n}): {excess_from_codims} != {excess}"
        )

    return DimensionReport(
        d=d,
        n=n,
        dim_grassmannian=dim_grassmannian,
        dim_affine_grassmannian=dim_affine,
        dim_lambda=dim_lambda,
        dim_E=dim_e,
        excess=excess,
        fio_order=Fraction(-d * (n - d + 1), 4),
        psdo_order=-d,
    )
