"""Certified pressure brackets and dimension-spectrum certificates for
conformal iterated function systems."""

__version__ = "0.1.0"

from .alphabet import (
    GaussianLetter,
    LetterSet,
    OrderedAlphabet,
    box_block,
    enumerate_letters,
    initial_block,
    parse_letter_set,
    tilde_block,
)
from .systems import (
    COMPLEX_CF,
    LINEARIZED_CF,
    REAL_CF,
    ContinuantState,
    SystemDescriptor,
    deriv_norm,
    deriv_norm_inf,
    word_deriv_bracket,
    word_deriv_norm,
)
from .pressure import (
    BowenBracket,
    BudgetError,
    PressureBracket,
    add_letter_bounds,
    bowen_bisect,
    markov_bracket,
    partition_function,
    pressure_bracket,
    tail_sum,
)
from .spectrum import (
    CertificationError,
    ConstructionError,
    GapBoundInput,
    SpectrumCertificate,
    TailRatioState,
    advance_tail_ratio,
    analytic_tail_condition,
    certify_interval,
    composite_interval,
    construct_subsystem,
    derive_cap_evidence,
    dimension_gap_bound,
    liminf_criterion,
    run_reference_ladder,
    tail_ratio_seed,
)
from .transfer import (
    LowerMatrix,
    OperatorGrid,
    TransferCertificate,
    build_lower_matrix,
    build_operator_grid,
    certify_dim_lower,
    cw_lower_bound,
)

__all__ = [
    "GaussianLetter", "LetterSet", "OrderedAlphabet", "box_block",
    "enumerate_letters", "initial_block", "parse_letter_set", "tilde_block",
    "COMPLEX_CF", "LINEARIZED_CF", "REAL_CF", "ContinuantState",
    "SystemDescriptor", "deriv_norm", "deriv_norm_inf", "word_deriv_bracket",
    "word_deriv_norm",
    "BowenBracket", "BudgetError", "PressureBracket", "add_letter_bounds",
    "bowen_bisect", "markov_bracket", "partition_function",
    "pressure_bracket", "tail_sum",
    "CertificationError", "ConstructionError", "GapBoundInput",
    "SpectrumCertificate", "TailRatioState", "advance_tail_ratio",
    "analytic_tail_condition", "certify_interval", "composite_interval",
    "construct_subsystem", "derive_cap_evidence", "dimension_gap_bound",
    "liminf_criterion", "run_reference_ladder", "tail_ratio_seed",
    "LowerMatrix", "OperatorGrid", "TransferCertificate",
    "build_lower_matrix", "build_operator_grid", "certify_dim_lower",
    "cw_lower_bound",
]
