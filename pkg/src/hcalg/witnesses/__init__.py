"""Witness vectors built from the constructive proofs, with their predictions."""

from .base import FAIL, INCONCLUSIVE, PASS, Witness, check_entry, exact_entry
from .cauchy import (
    WitnessSpecCauchy,
    build_cauchy_witness,
    choose_shift_amounts,
    lex_max,
    prepare_cauchy,
    search_cauchy_witness,
)
from .coordwise import (
    KappaBeta,
    WitnessSpecCoord,
    build_bilateral_witness,
    build_coordwise_witness,
    search_coordwise_witness,
    select_kappa_beta,
)
from .frequent import (
    Target,
    build_c0_fhc,
    build_omega_fhc,
    build_omega_hc_mixed,
    classify_regimes,
    compute_Nr,
    degree_sequence,
    dense_scalars,
    dense_targets,
)
from .upper import (
    build_ufhc_cauchy,
    build_ufhc_coordwise,
    check_condition_b,
    find_tail_threshold,
    search_ufhc_coordwise,
    ufhc_q,
    worst_case_tail,
)

__all__ = [
    "FAIL",
    "INCONCLUSIVE",
    "KappaBeta",
    "PASS",
    "Target",
    "Witness",
    "WitnessSpecCauchy",
    "WitnessSpecCoord",
    "build_bilateral_witness",
    "build_c0_fhc",
    "build_cauchy_witness",
    "build_coordwise_witness",
    "build_omega_fhc",
    "build_omega_hc_mixed",
    "build_ufhc_cauchy",
    "build_ufhc_coordwise",
    "check_condition_b",
    "check_entry",
    "choose_shift_amounts",
    "classify_regimes",
    "compute_Nr",
    "degree_sequence",
    "dense_scalars",
    "dense_targets",
    "exact_entry",
    "find_tail_threshold",
    "lex_max",
    "prepare_cauchy",
    "search_cauchy_witness",
    "search_coordwise_witness",
    "search_ufhc_coordwise",
    "select_kappa_beta",
    "ufhc_q",
    "worst_case_tail",
]
