"""Multicolour East model toolkit: dynamics, spectra, paths, crossings."""

from .lattice import (
    NEUTRAL,
    AllFacilitating,
    CapExceeded,
    Closed,
    Configuration,
    DensitySumNotBelowOne,
    DuplicateType,
    EmptyVacancySet,
    Frozen,
    ModelSpec,
    NonPositiveDensity,
    Region,
    SpecError,
    TypeOutsideHypercube,
    all_neutral,
    constraint,
    hypercube,
    measure_weight,
    partial_order_leq,
    propagation_directions,
    sample_config,
    validate_params,
)

__version__ = "0.1.0"
