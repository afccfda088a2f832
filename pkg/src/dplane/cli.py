"""Command-line interface: seeded, file-based runs of the library pipelines.

Subcommands: constants, sample, forward, backproject, symbol-estimate,
reconstruct. All randomness flows from the global --seed (default 0);
repeated runs with the same seed and thread count produce byte-identical
output files. Report-producing subcommands write a rendered figure next
to their delimited outputs.
"""

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import fields, figures, phantoms, spectral, transform
from .constants import (
    dimension_report,
    gamma_ratio_constant,
    grassmannian_volume,
    so_volume,
)
from .geometry import AffinePlane, Frame, haar_orthogonal

__all__ = ["main"]

# Exit codes: 0 success, 1 runtime failure, 2 usage (argparse), 3 a
# requested measurement tolerance was not met.
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TOLERANCE = 3


class CliError(Exception):
    """User-facing failure; message printed to stderr, exit code 1."""


def _fmt(x) -> str:
    """17 significant digits: round-trips doubles exactly in CSV."""
    return format(float(x), ".17g")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


@dataclass
class RunConfig:
    """Validated run parameters shared by the sampling subcommands."""

    d: int
    n: int
    seed: int
    samples: int
    grid_size: int
    grid_step: float
    threads: int

    def __post_init__(self) -> None:
        if not 1 <= self.d < self.n <= 16:
            raise CliError(f"need 1 <= d < n <= 16, got d={self.d}, n={self.n}")
        if self.samples < 2:
            raise CliError(f"need samples >= 2, got {self.samples}")
        if self.grid_size < 8 or self.grid_size % 2:
            raise CliError(f"grid size must be even and >= 8, got {self.grid_size}")
        if not self.grid_step > 0:
            raise CliError(f"grid step must be positive, got {self.grid_step}")
        if self.threads < 1:
            raise CliError(f"threads must be >= 1, got {self.threads}")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.grid_size,) * self.n

    @property
    def origin(self) -> np.ndarray:
        return fields.centered_origin(self.dims, self.grid_step)


def _parse_range(text: str) -> range:
    """Inclusive 'lo:hi' (or single integer) to a range object."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise CliError(f"bad range {text!r}; expected 'lo:hi' or a single integer") from None
    return range(lo, hi + 1)


def _load_phantom(path) -> phantoms.GaussianMixture:
    try:
        return phantoms.load_phantom(path)
    except OSError as exc:
        raise CliError(f"cannot read phantom file: {exc}") from None
    except phantoms.PhantomFormatError as exc:
        raise CliError(f"phantom file {path}: {exc}") from None


def _load_points(path, n: int) -> np.ndarray:
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    coords = [float(tok) for tok in line.split()]
                except ValueError as exc:
                    raise CliError(f"points file line {lineno}: bad number: {exc}") from None
                if len(coords) != n:
                    raise CliError(
                        f"points file line {lineno}: expected {n} coordinates, got {len(coords)}"
                    )
                rows.append(coords)
    except OSError as exc:
        raise CliError(f"cannot read points file: {exc}") from None
    if not rows:
        raise CliError("points file defines no points")
    return np.asarray(rows, dtype=float)


def _load_planes(path) -> tuple[int, int, list[AffinePlane]]:
    """Parse a planes file.

    First non-comment line: ``planes <d> <n>``; then one plane per line:
    ``plane`` followed by n*d frame entries (column-major) and n
    coordinates of any point on the plane. Frame columns are
    orthonormalized deterministically; the point is reduced to its
    normal-space offset.
    """
    d = n = None
    planes: list[AffinePlane] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                tokens = line.split()
                if d is None:
                    if tokens[0] != "planes" or len(tokens) != 3:
                        raise CliError(
                            f"planes file line {lineno}: expected header 'planes <d> <n>'"
                        )
                    try:
                        d, n = int(tokens[1]), int(tokens[2])
                    except ValueError:
                        raise CliError(f"planes file line {lineno}: bad header integers") from None
                    if not 1 <= d < n:
                        raise CliError(f"planes file line {lineno}: need 1 <= d < n")
                    continue
                if tokens[0] != "plane":
                    raise CliError(f"planes file line {lineno}: unknown record {tokens[0]!r}")
                expected = n * d + n
                if len(tokens) - 1 != expected:
                    raise CliError(
                        f"planes file line {lineno}: expected {expected} numbers, "
                        f"got {len(tokens) - 1}"
                    )
                try:
                    values = np.array([float(tok) for tok in tokens[1:]])
                except ValueError as exc:
                    raise CliError(f"planes file line {lineno}: bad number: {exc}") from None
                cols = values[: n * d].reshape(n, d, order="F")
                point = values[n * d :]
                q, r = np.linalg.qr(cols)
                if np.min(np.abs(np.diag(r))) < 1e-12:
                    raise CliError(f"planes file line {lineno}: frame columns are degenerate")
                q = q * np.where(np.diag(r) < 0, -1.0, 1.0)[None, :]
                frame = Frame(q)
                offset = point - frame.columns @ (frame.columns.T @ point)
                planes.append(AffinePlane(frame, offset))
    except OSError as exc:
        raise CliError(f"cannot read planes file: {exc}") from None
    if d is None:
        raise CliError("planes file has no header line")
    return d, n, planes


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_constants(args) -> int:
    d_range = _parse_range(args.d_range)
    n_range = _parse_range(args.n_range)
    header = [
        "d",
        "n",
        "vol_sphere_product",
        "vol_so_quotient",
        "excess",
        "fio_order",
        "psdo_order",
        "dim_grassmannian",
        "dim_affine_grassmannian",
        "dim_lambda",
        "dim_E",
        "gamma_ratio",
    ]
    rows = []
    for n in n_range:
        for d in d_range:
            if not 1 <= d < n:
                continue
            rep = dimension_report(d, n)
            vol = grassmannian_volume(d, n)
            quotient = so_volume(n) / (
                2.0 ** (d * (n - d) / 2.0) * so_volume(d) * so_volume(n - d)
            )
            rows.append(
                [
                    d,
                    n,
                    _fmt(vol),
                    _fmt(quotient),
                    rep.excess,
                    str(Fraction(rep.fio_order)),
                    rep.psdo_order,
                    rep.dim_grassmannian,
                    rep.dim_affine_grassmannian,
                    rep.dim_lambda,
                    rep.dim_E,
                    _fmt(gamma_ratio_constant(d, n)),
                ]
            )
    if args.output:
        _write_csv(args.output, header, rows)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    return EXIT_OK


def _cmd_sample(args) -> int:
    if not 1 <= args.d < args.n <= 16:
        raise CliError(f"need 1 <= d < n <= 16, got d={args.d}, n={args.n}")
    if args.count < 1:
        raise CliError(f"count must be >= 1, got {args.count}")
    rng = np.random.default_rng(args.seed)
    header = ["index"] + [f"col{j}_{i}" for j in range(args.d) for i in range(args.n)]
    rows = []
    for k in range(args.count):
        q = haar_orthogonal(args.n, rng)
        entries = q[:, : args.d].reshape(-1, order="F")
        rows.append([k] + [_fmt(v) for v in entries])
    _write_csv(args.output, header, rows)
    print(f"sample: wrote {len(rows)} frames to {args.output}")
    return EXIT_OK


def _cmd_forward(args) -> int:
    f = _load_phantom(args.phantom)
    n = f.ambient_dim
    if args.planes and args.angles:
        raise CliError("give either --planes or --angles, not both")
    if not args.planes and not args.angles:
        raise CliError("one of --planes or --angles is required")
    if args.planes:
        d, n_planes, planes = _load_planes(args.planes)
        if n_planes != n:
            raise CliError(
                f"planes dimension n={n_planes} does not match phantom dimension n={n}"
            )
        phi = transform.forward_analytic(f, d)
        header = (
            [f"frame_{i}{j}" for j in range(d) for i in range(n)]
            + [f"offset_{i}" for i in range(n)]
            + ["value"]
        )
        rows = []
        for plane in planes:
            entries = list(plane.frame.columns.reshape(-1, order="F")) + list(plane.offset)
            rows.append([_fmt(v) for v in entries] + [_fmt(phi(plane))])
    else:
        if n != 2:
            raise CliError("--angles requires a 2-d phantom; use --planes otherwise")
        if args.offsets is None:
            raise CliError("--angles requires --offsets LO:HI:COUNT")
        parts = args.offsets.split(":")
        if len(parts) != 3:
            raise CliError("--offsets must be LO:HI:COUNT")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise CliError("--offsets must be LO:HI:COUNT") from None
        if count < 1:
            raise CliError("offset count must be >= 1")
        phi = transform.forward_analytic(f, 1)
        offsets = np.linspace(lo, hi, count)
        header = ["theta", "offset", "value"]
        rows = []
        for k in range(args.angles):
            theta = k * np.pi / args.angles
            direction = np.array([np.cos(theta), np.sin(theta)])
            normal = np.array([-np.sin(theta), np.cos(theta)])
            frame = Frame(direction[:, None])
            for t in offsets:
                plane = AffinePlane(frame, t * normal)
                rows.append([_fmt(theta), _fmt(t), _fmt(phi(plane))])
    _write_csv(args.output, header, rows)
    print(f"forward: wrote {len(rows)} sinogram values to {args.output}")
    return EXIT_OK


def _cmd_backproject(args) -> int:
    f = _load_phantom(args.phantom)
    n = f.ambient_dim
    config = RunConfig(args.d, n, args.seed, args.samples, 8, 1.0, args.threads)
    points = _load_points(args.points, n)
    phi = transform.forward_analytic(f, config.d)
    estimates = transform.backproject_points(
        phi, points, config.samples, config.seed, config.threads
    )
    header = [f"x_{i}" for i in range(n)] + ["value", "std_error", "samples"]
    rows = [
        [_fmt(c) for c in pt] + [_fmt(est.value), _fmt(est.std_error), est.samples]
        for pt, est in zip(points, estimates)
    ]
    _write_csv(args.output, header, rows)
    print(f"backproject: wrote {len(rows)} estimates to {args.output}")
    return EXIT_OK


def _symbol_summary(report) -> str:
    consistency = report.candidate_consistency()
    verdict = {True: "within measurement interval", False: "outside measurement interval"}
    lines = [
        f"symbol measurement for d={report.d}, n={report.n}",
        (
            f"  grid {report.grid_dims[0]}^{report.n}, spacing {report.grid_spacing:g}, "
            f"samples {report.samples}, seed {report.seed}"
        ),
        f"  fit band |xi| in [{report.band[0]:.4g}, {report.band[1]:.4g}] ({len(report.freq_table)} shells)",
        f"  fitted homogeneity exponent: {report.exponent:.4f} (target {-report.d})",
        f"  kappa measured:              {report.kappa_measured:.6g} +- {report.kappa_std_error:.3g}",
        f"  kappa volume candidate:      {report.kappa_paper:.6g} -> {verdict[consistency['paper']]}",
        f"  kappa gamma-ratio candidate: {report.kappa_gamma:.6g} -> {verdict[consistency['gamma']]}",
        (
            f"  requested precision {report.tolerance:.1%}: "
            f"{'met' if report.precision_ok else 'NOT met'}"
        ),
    ]
    return "\n".join(lines)


def _cmd_symbol_estimate(args) -> int:
    grid_size = args.grid_size or (128 if args.n == 2 else 48)
    grid_step = args.grid_step or (0.1875 if args.n == 2 else 0.25)
    samples = args.samples or (20000 if args.n == 2 else 6000)
    config = RunConfig(args.d, args.n, args.seed, samples, grid_size, grid_step, args.threads)
    report = spectral.symbol_estimate_grid(
        config.d,
        config.n,
        config.dims,
        config.grid_step,
        samples=config.samples,
        rng=config.seed,
        width=args.width,
        tolerance=args.tolerance,
        threads=config.threads,
    )
    prefix = args.output_prefix
    _write_csv(
        f"{prefix}_table.csv",
        ["freq_mag", "multiplier", "scaled_multiplier", "bins"],
        [
            [_fmt(m), _fmt(a), _fmt(s), int(c)]
            for m, a, s, c in report.freq_table
        ],
    )
    summary = _symbol_summary(report)
    with open(f"{prefix}_summary.txt", "w", encoding="utf-8") as fh:
        fh.write(summary + "\n")
    figures.render_symbol_figure(report, f"{prefix}_figure.png")
    print(summary)
    return EXIT_OK if report.precision_ok else EXIT_TOLERANCE


def _cmd_reconstruct(args) -> int:
    f = _load_phantom(args.phantom)
    n = f.ambient_dim
    grid_size = args.grid_size or (128 if n == 2 else 64)
    grid_step = args.grid_step or (0.3 if n == 2 else 0.35)
    samples = args.samples or (50000 if n == 2 else 20000)
    config = RunConfig(args.d, n, args.seed, samples, grid_size, grid_step, args.threads)
    if args.mode == "explicit" and (args.kappa is None or not args.kappa > 0):
        raise CliError("--mode explicit requires --kappa > 0")
    phi = transform.forward_analytic(f, config.d)
    recon = spectral.fbp_reconstruct(
        phi,
        config.dims,
        config.grid_step,
        samples=config.samples,
        rng=config.seed,
        mode=args.mode,
        kappa=args.kappa,
        threads=config.threads,
        filter_domain=args.filter_domain,
    )
    truth = fields.sample_mixture(f, config.dims, config.grid_step, recon.origin)
    err = spectral.relative_l2_error(recon, truth)
    kappa_used = {
        "paper": grassmannian_volume(config.d, n),
        "calibrated": spectral.symbol_constant_closed(config.d, n),
        "explicit": args.kappa,
    }[args.mode]

    prefix = args.output_prefix
    fields.write_field(recon, f"{prefix}.dplf")
    fields.write_pgm(recon, f"{prefix}.pgm")
    _write_csv(
        f"{prefix}_summary.csv",
        ["metric", "value"],
        [
            ["d", config.d],
            ["n", n],
            ["grid_size", config.grid_size],
            ["grid_step", _fmt(config.grid_step)],
            ["samples", config.samples],
            ["seed", config.seed],
            ["mode", args.mode],
            ["kappa_used", _fmt(kappa_used)],
            ["rel_l2_error_mean_subtracted", _fmt(err)],
        ],
    )
    figures.render_reconstruction_figure(truth, recon, f"{prefix}_figure.png")
    print(
        f"reconstruct: d={config.d} n={n} mode={args.mode} "
        f"rel_l2_error={err:.4f} -> {prefix}.dplf"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dplane",
        description="d-plane transform: forward, backprojection, inversion, symbol measurement",
    )
    parser.add_argument("--seed", type=int, default=0, help="global random seed (default 0)")
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("DPLANE_THREADS", "1")),
        help="worker threads for Monte Carlo blocks (default $DPLANE_THREADS or 1)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="table of volumes, orders, and dimension counts")
    p.add_argument("--d-range", default="1:1", help="inclusive d range 'lo:hi'")
    p.add_argument("--n-range", default="2:2", help="inclusive n range 'lo:hi'")
    p.add_argument("-o", "--output", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("sample", help="draw Haar-random subspace frames")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("-o", "--output", required=True, help="CSV path")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("forward", help="plane-transform a phantom over planes")
    p.add_argument("--phantom", required=True, help="phantom file")
    p.add_argument("--planes", default=None, help="planes file (see README)")
    p.add_argument("--angles", type=int, default=None, help="angle count (n=2 line grid)")
    p.add_argument("--offsets", default=None, help="LO:HI:COUNT signed offsets (with --angles)")
    p.add_argument("-o", "--output", required=True, help="CSV path")
    p.set_defaults(func=_cmd_forward)

    p = sub.add_parser("backproject", help="Monte Carlo adjoint at listed points")
    p.add_argument("--phantom", required=True, help="phantom file (sinogram source)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--points", required=True, help="points file, one point per line")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("-o", "--output", required=True, help="CSV path")
    p.set_defaults(func=_cmd_backproject)

    p = sub.add_parser("symbol-estimate", help="measure the normal-operator constant")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--grid-size", type=int, default=None)
    p.add_argument("--grid-step", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--width", type=float, default=0.5, help="test Gaussian width")
    p.add_argument("--tolerance", type=float, default=None, help="relative precision target")
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=_cmd_symbol_estimate)

    p = sub.add_parser("reconstruct", help="filtered backprojection of a phantom")
    p.add_argument("--phantom", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", choices=["paper", "calibrated", "explicit"], default="calibrated")
    p.add_argument("--kappa", type=float, default=None, help="constant for --mode explicit")
    p.add_argument(
        "--filter-domain",
        choices=["auto", "grid", "plane"],
        default="auto",
        help="apply |xi|^d on the grid (DFT) or per plane profile (even d)",
    )
    p.add_argument("--grid-size", type=int, default=None)
    p.add_argument("--grid-step", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=_cmd_reconstruct)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"dplane: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"dplane: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
