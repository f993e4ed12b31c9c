"""Key-rate analysis and protocol simulation for one-sided device-independent QKD."""

from .quantum import (
    DIAG_MINUS,
    DIAG_PLUS,
    SIGMA_X,
    SIGMA_Z,
    BinaryObservable,
    JointDistribution,
    TwoQubitState,
    bell_phi_plus,
    born_joint,
    correlator,
    depolarize,
)
from .rates import (
    BOUND_FAMILIES,
    PER_BOB_DETECTION,
    PER_PAIR,
    ChannelParams,
    ErrorRates,
    KeyRateReport,
    ScenarioRow,
    binary_entropy,
    bounds_report,
    chsh_eve_term,
    conditional_entropy,
    conditional_entropy_bound,
    model_error_rates,
    rate_1sdi_nops,
    rate_1sdi_ps,
    rate_di_mpa,
    rate_di_ps_r2,
    rate_sqkd_r0,
    scenario_table,
    steering_margin_s1,
    steering_margin_two_setting,
)
from .simulate import (
    InsufficientStatisticsError,
    KeyResult,
    OutcomeTally,
    RoundRecord,
    SiftedStrings,
    SimConfig,
    bits_to_hex,
    estimate_rates,
    extract_key,
    iter_rounds,
    run_rounds,
    squash_bob,
    steering_entropy_sum,
    strings_to_csv,
    tally_to_csv,
)
from .thresholds import (
    CurveSpec,
    ThresholdQuery,
    curve,
    curve_to_csv,
    family_rate,
    find_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryObservable",
    "BOUND_FAMILIES",
    "ChannelParams",
    "CurveSpec",
    "DIAG_MINUS",
    "DIAG_PLUS",
    "ErrorRates",
    "InsufficientStatisticsError",
    "JointDistribution",
    "KeyRateReport",
    "KeyResult",
    "OutcomeTally",
    "PER_BOB_DETECTION",
    "PER_PAIR",
    "RoundRecord",
    "ScenarioRow",
    "SiftedStrings",
    "SIGMA_X",
    "SIGMA_Z",
    "SimConfig",
    "ThresholdQuery",
    "TwoQubitState",
    "bell_phi_plus",
    "binary_entropy",
    "bits_to_hex",
    "born_joint",
    "bounds_report",
    "chsh_eve_term",
    "conditional_entropy",
    "conditional_entropy_bound",
    "correlator",
    "curve",
    "curve_to_csv",
    "depolarize",
    "estimate_rates",
    "extract_key",
    "family_rate",
    "find_threshold",
    "iter_rounds",
    "model_error_rates",
    "rate_1sdi_nops",
    "rate_1sdi_ps",
    "rate_di_mpa",
    "rate_di_ps_r2",
    "rate_sqkd_r0",
    "run_rounds",
    "scenario_table",
    "squash_bob",
    "steering_entropy_sum",
    "steering_margin_s1",
    "steering_margin_two_setting",
    "strings_to_csv",
    "tally_to_csv",
]
