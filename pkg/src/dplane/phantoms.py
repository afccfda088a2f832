"""Isotropic Gaussian mixtures with closed-form transforms.

These are the analytic test functions of the whole artifact: a mixture
of isotropic Gaussians can be evaluated, plane-integrated, and Fourier
transformed in closed form, which supplies exact oracles for every
numerical pipeline downstream.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import AffinePlane

__all__ = [
    "GaussianTerm",
    "GaussianMixture",
    "eval_mixture",
    "eval_mixture_many",
    "dplane_closed_form",
    "fourier_closed_form",
    "rotate_mixture",
    "parse_phantom",
    "load_phantom",
]


@dataclass(frozen=True)
class GaussianTerm:
    """One isotropic Gaussian bump: amplitude * exp(-|x - center|^2 / (2 width^2))."""

    amplitude: float
    center: np.ndarray
    width: float

    def __post_init__(self) -> None:
        center = np.array(self.center, dtype=float)
        if center.ndim != 1 or center.size == 0:
            raise ValueError("center must be a nonempty vector")
        if not np.all(np.isfinite(center)) or not np.isfinite(self.amplitude):
            raise ValueError("term fields must be finite")
        if not self.width > 0 or not np.isfinite(self.width):
            raise ValueError(f"width must be positive and finite, got {self.width}")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "width", float(self.width))


@dataclass(frozen=True)
class GaussianMixture:
    """Ordered sum of GaussianTerm bumps sharing one ambient dimension."""

    terms: tuple[GaussianTerm, ...]

    def __post_init__(self) -> None:
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("mixture must have at least one term")
        n = terms[0].center.shape[0]
        if any(t.center.shape[0] != n for t in terms):
            raise ValueError("all terms must share the ambient dimension")
        object.__setattr__(self, "terms", terms)

    @property
    def ambient_dim(self) -> int:
        return self.terms[0].center.shape[0]


def unit_gaussian(n: int, width: float = 1.0, amplitude: float = 1.0) -> GaussianMixture:
    """Centered single-term mixture in dimension n."""
    return GaussianMixture((GaussianTerm(amplitude, np.zeros(n), width),))


def _check_dim(f: GaussianMixture, x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != f.ambient_dim:
        raise ValueError(
            f"{what} dimension {x.shape[-1]} does not match mixture dimension {f.ambient_dim}"
        )
    return x


def eval_mixture(f: GaussianMixture, x: np.ndarray) -> float:
    """Value of the mixture at a single point."""
    x = _check_dim(f, x, "point")
    total = 0.0
    for t in f.terms:
        r2 = float(np.sum((x - t.center) ** 2))
        total += t.amplitude * np.exp(-r2 / (2.0 * t.width**2))
    return total


def eval_mixture_many(f: GaussianMixture, points: np.ndarray) -> np.ndarray:
    """Vectorized evaluation at an (m, n) array of points."""
    points = _check_dim(f, points, "points")
    out = np.zeros(points.shape[:-1])
    for t in f.terms:
        r2 = np.sum((points - t.center) ** 2, axis=-1)
        out += t.amplitude * np.exp(-r2 / (2.0 * t.width**2))
    return out


def dplane_closed_form(f: GaussianMixture, plane: AffinePlane) -> float:
    """Integral of the mixture over an affine d-plane, in closed form.

    Integrating an isotropic Gaussian over a d-plane leaves a Gaussian in
    the normal offset: each term contributes
    amplitude * (2 pi width^2)^{d/2} * exp(-|offset - c|^2 / (2 width^2))
    with c the normal-space part of the term's center.
    """
    cols = plane.frame.columns
    if cols.shape[0] != f.ambient_dim:
        raise ValueError("plane and mixture dimensions do not match")
    d = cols.shape[1]
    total = 0.0
    for t in f.terms:
        normal_center = t.center - cols @ (cols.T @ t.center)
        r2 = float(np.sum((plane.offset - normal_center) ** 2))
        pref = (2.0 * np.pi * t.width**2) ** (d / 2.0)
        total += t.amplitude * pref * np.exp(-r2 / (2.0 * t.width**2))
    return total


def fourier_closed_form(f: GaussianMixture, xi: np.ndarray) -> complex:
    """Fourier transform integral exp(-i y.xi) f(y) dy, in closed form.

    Each term contributes
    amplitude * (2 pi width^2)^{n/2} * exp(-i center.xi) * exp(-width^2 |xi|^2 / 2).
    """
    xi = _check_dim(f, xi, "frequency")
    n = f.ambient_dim
    total = 0.0 + 0.0j
    for t in f.terms:
        pref = t.amplitude * (2.0 * np.pi * t.width**2) ** (n / 2.0)
        phase = np.exp(-1j * float(t.center @ xi))
        total += pref * phase * np.exp(-(t.width**2) * float(xi @ xi) / 2.0)
    return complex(total)


def rotate_mixture(f: GaussianMixture, rotation: np.ndarray) -> GaussianMixture:
    """Mixture of f composed with the inverse rotation (centers move to R c)."""
    rotation = np.asarray(rotation, dtype=float)
    return GaussianMixture(
        tuple(GaussianTerm(t.amplitude, rotation @ t.center, t.width) for t in f.terms)
    )


class PhantomFormatError(ValueError):
    """Raised on malformed phantom files; carries the offending line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def parse_phantom(text: str) -> GaussianMixture:
    """Parse the phantom text format into a mixture.

    One term per line: ``gaussian <amplitude> <center_1> ... <center_n> <width>``.
    Blank lines and ``#`` comments are ignored; the ambient dimension is
    inferred from the first term and must be consistent.
    """
    terms: list[GaussianTerm] = []
    dim: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] != "gaussian":
            raise PhantomFormatError(lineno, f"unknown record type {tokens[0]!r}")
        if len(tokens) < 4:
            raise PhantomFormatError(lineno, "expected: gaussian <a> <mu...> <s>")
        try:
            values = [float(tok) for tok in tokens[1:]]
        except ValueError as exc:
            raise PhantomFormatError(lineno, f"bad number: {exc}") from None
        amplitude, *center, width = values
        if dim is None:
            dim = len(center)
        elif len(center) != dim:
            raise PhantomFormatError(
                lineno, f"center has {len(center)} coordinates, expected {dim}"
            )
        try:
            terms.append(GaussianTerm(amplitude, np.array(center), width))
        except ValueError as exc:
            raise PhantomFormatError(lineno, str(exc)) from None
    if not terms:
        raise PhantomFormatError(0, "phantom file defines no terms")
    return GaussianMixture(tuple(terms))


def load_phantom(path) -> GaussianMixture:
    """Read a phantom file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_phantom(fh.read())
