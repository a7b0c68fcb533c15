"""Exact dyadic-grid toolkit for projections, sumsets and Frostman measures."""

from fslab.content import ContentValue, dyadic_content, max_frostman
from fslab.dyadic import (
    Direction,
    ExplicitSet2D,
    GridSet1D,
    ProductSet2D,
    RescaleMap,
    covering_number,
    direction_grid,
    neighborhood,
    product,
    rescale,
)
from fslab.inverse import (
    BranchingProfile,
    NonUniform,
    PigeonholeFailure,
    branching_profile,
    good_scale_count,
    inverse_hypothesis_check,
    pigeonhole_branching_scale,
    regularize_uniform_subset,
)
from fslab.lab import ExperimentConfig, ResultTable, dimension_estimate, run_experiment
from fslab.measures import (
    DeltaMeasure,
    conditional_entropy,
    convolve,
    entropy,
    l2_norm,
    restrict_normalize,
)
from fslab.projections import (
    ScaleWindow,
    affine_sumset,
    fiber_decomposition_check,
    high_multiplicity_set,
    hm_scan,
    multiplicity,
    project_set,
    prop3_probe,
    single_scale_check,
)
from fslab.regularity import (
    RegularityParams,
    check_regularity,
    gen_ap_family,
    gen_random_cantor,
    gen_self_similar,
    minimal_constant,
)

__version__ = "0.1.0"

__all__ = [
    "BranchingProfile",
    "ContentValue",
    "DeltaMeasure",
    "Direction",
    "ExperimentConfig",
    "ExplicitSet2D",
    "GridSet1D",
    "NonUniform",
    "PigeonholeFailure",
    "ProductSet2D",
    "RegularityParams",
    "RescaleMap",
    "ResultTable",
    "ScaleWindow",
    "affine_sumset",
    "branching_profile",
    "check_regularity",
    "conditional_entropy",
    "convolve",
    "covering_number",
    "dimension_estimate",
    "direction_grid",
    "dyadic_content",
    "entropy",
    "fiber_decomposition_check",
    "gen_ap_family",
    "gen_random_cantor",
    "gen_self_similar",
    "good_scale_count",
    "high_multiplicity_set",
    "hm_scan",
    "inverse_hypothesis_check",
    "l2_norm",
    "max_frostman",
    "minimal_constant",
    "multiplicity",
    "neighborhood",
    "pigeonhole_branching_scale",
    "product",
    "project_set",
    "prop3_probe",
    "regularize_uniform_subset",
    "rescale",
    "restrict_normalize",
    "run_experiment",
    "single_scale_check",
]
