"""Post-hoc hypothesis testing: e-values, data-dependent significance
levels, size-distortion analysis, utility-optimal evidence, p-functions,
and anytime-valid sequential checks."""

from ._numbers import INF, TOL, fmt_number, frac, parse_number
from .core import (
    DiscreteSpace,
    E_SCALE,
    EvidenceLattice,
    EvidenceVariable,
    Hypothesis,
    P_SCALE,
    PValueLaw,
    TestFunction,
    ValidityReport,
    check_classical_validity,
    check_posthoc_validity,
    dual,
    family_of_evidence,
    law_of,
    p_value,
    posthoc_evidence_of_family,
)
from .distortion import (
    AlphaStrategy,
    DistortionReport,
    ImpossibilityVerdict,
    conditional_size,
    conservative_strategy,
    decreasing_alpha_strategy,
    distortion_report,
    expected_size_distortion,
    fragility_strategy,
    impossibility_audit,
    max_size_distortion,
    monte_carlo_distortion,
    reject_at_p_strategy,
    uniform_p_law,
    valid_hacking_law,
)
from .calibration import (
    MinimalHCounterexample,
    check_h_validity,
    h_mean,
    minimal_h_counterexample,
    size_difference_validity,
)
from .pfunctions import (
    PCurve,
    PFunction,
    RandomizedTestFunction,
    TCurve,
    check_pfunction_posthoc,
    p_value_head,
    pfunction_of,
    soft_test_function,
    test_function_of,
    uniform_randomize,
)
from .merging import (
    ShapeConditionError,
    merge_geometric,
    merge_h_mean,
    merge_harmonic,
    merge_pfunctions_harmonic,
    merge_pfunctions_product,
    merge_product_independent,
    product_merge_failure_witness,
)
from .design import (
    SimplePair,
    UtilitySpec,
    bernoulli_pair,
    best_region_exhaustive,
    brute_force_optimal,
    double_posthoc_check,
    expected_utility,
    gaussian_log_optimal_report,
    gaussian_shift_pair,
    log_optimal,
    np_optimal,
    np_rejection_region,
    utility_optimal,
)
from .sequential import (
    EPROCESS,
    MARTINGALE,
    ProcessModel,
    StoppingRule,
    SUPERMARTINGALE,
    TestFamilyCollection,
    VilleReport,
    anytime_validity_check,
    fdr_average,
    fwer_merge,
    invalid_eprocess_fixture,
    markov_equality_check,
    martingale_fixture,
    mrmw_sandwich,
    simulate_paths,
    supermartingale_fixture,
    ville_equality_check,
)

__version__ = "0.1.0"
