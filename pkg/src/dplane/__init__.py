"""d-plane transform on R^n: forward, adjoint, inversion, symbol measurement."""

from .constants import (
    DimensionReport,
    dimension_report,
    gamma_fn,
    gamma_ratio_constant,
    grassmannian_volume,
    so_volume,
    sphere_volume,
)
from .fields import GridField, read_field, sample_mixture, write_field, write_pgm
from .geometry import (
    AffinePlane,
    CanonicalRelationPoint,
    Frame,
    canonical_relation_point,
    check_lambda_descriptions,
    complement_part,
    haar_orthogonal,
    project,
    sample_subspace,
    sample_subspace_in_complement,
)
from .phantoms import (
    GaussianMixture,
    GaussianTerm,
    dplane_closed_form,
    eval_mixture,
    fourier_closed_form,
    load_phantom,
    parse_phantom,
)
from .spectral import (
    SpectralField,
    SymbolReport,
    apply_power_multiplier,
    dft_forward,
    dft_inverse,
    fbp_reconstruct,
    relative_l2_error,
    riesz_at_origin,
    symbol_constant_closed,
    symbol_estimate_grid,
)
from .transform import (
    McEstimate,
    SinogramFunction,
    adjointness_check,
    backproject_mc,
    backproject_points,
    backproject_quadrature,
    forward_analytic,
    forward_grid,
    normal_field,
    normal_operator,
    plane_filtered_sinogram,
)

__version__ = "0.1.0"
