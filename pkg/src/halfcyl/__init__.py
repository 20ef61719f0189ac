"""Numerical diagnostics for boundary value problems on model half-cylinders.

Spectral truncations of selfadjoint boundary operators, the hybrid
check/hat boundary spaces, boundary conditions and their adjoints, the
model-cylinder identities, Callias-type potential checks, and Fredholm
index diagnostics, each backed by exact identities or independent oracles.
"""

from .spectral import (
    BorelInterval,
    DomainError,
    EigenSystem,
    GradedVector,
    LogGridSpec,
    SpectralProjector,
    borel_apply,
    borel_matrix,
    bounded_set_smoothing_check,
    chi_minus,
    chi_plus,
    dual_norm,
    frac_norm,
    involution_report,
    quadratic_estimate,
    rellich_singular_values,
    semigroup,
    sgn,
    spectral_projector,
)
from .czech import CzechDatum, czech_norm, hat_norm, pairing, shift_compare
from .conditions import (
    BoundaryCondition,
    RegularityReport,
    adjoint_bc,
    aps,
    chiral,
    chiral_adjoint,
    matching,
    projection_bc,
    regularity_check,
)
from .cylinder import (
    CutoffProfile,
    CylinderGrid,
    CylinderOperator,
    CylinderSection,
    apply_full,
    apply_model,
    energy_identity_residual,
    extension,
    greens_residual,
    h1_embedding_svals,
    near_boundary_apriori,
    trace_constant,
)
from .dirac import (
    CalliasSpec,
    CircleDiracSpec,
    callias_check,
    circle_dirac,
    discreteness_proxy,
    multiplier_halfnorm_check,
    para_callias_check,
    strongly_para_profile,
)
from .fredholm import (
    AssembledBVP,
    aps_index_oracle,
    assemble_bvp,
    coercivity_margin,
    index,
    kernel_dim,
    semifredholm_report,
)

__version__ = "0.1.0"
