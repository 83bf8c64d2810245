"""Weighted function-space toolkit for power weights on the last coordinate.

Submodules:

- dyadic: exact dyadic box geometry and weight masses
- seqspaces: sequence-space norms (Besov-type, weighted Lorentz, companion-box)
- wavelets: compactly supported orthonormal wavelet systems, synthesis/analysis
- traceext: boundary trace and extension operators, atomic decompositions
- interpolation: K-functionals and real-interpolation certification
- cli: command line front end
"""

from .dyadic import (
    DyadicCube,
    EBox,
    IntBox,
    WeightAlpha,
    muckenhoupt_range,
    power_integral,
    weight_axis_mass,
    weight_mass_cube,
    weight_mass_E,
)
from .interpolation import (
    KCurve,
    KResult,
    LatticeCouple,
    ProductCouple,
    besov_group_couple,
    brute_force_k,
    certify_besov_interpolation,
    certify_seq_interpolation,
    k_curve,
    k_functional,
    op_P_A,
    op_R,
    product_k,
    seq_f_couple,
    theta_r_norm,
    weighted_lp_couple,
)
from .seqspaces import (
    CoeffParseError,
    CoeffSeq,
    FlatSeq,
    SimpleFunction,
    SpaceParams,
    besov_seq_norm,
    f_seq_norm,
    fqLpr_norm,
    fq_lp_norm,
    lambda_s_build,
    lambda_s_lorentz_fast,
    lorentz_norm_discrete,
    parse_coeffs,
    random_coeffs,
    random_flatseq,
    read_coeffs,
    write_coeffs,
)
from .traceext import (
    AtomicDecomp,
    CutoffFunction,
    atom_validate,
    ext_coefficients,
    ext_function,
    ext_norm_ratio,
    system_for,
    trace_function,
)
from .wavelets import (
    GridSpec,
    SampledFunction,
    analyze,
    build_system,
    cascade_values,
    covering_grid,
    daubechies_filter,
    synthesize,
)

__version__ = "0.1.0"
