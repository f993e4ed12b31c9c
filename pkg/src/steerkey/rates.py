"""Closed-form key-rate bounds and steering margins.

All bounds are asymptotic and returned unclamped: negative values mean the
bound certifies no secret key, and callers that only care about feasibility
should test the sign.  Rates come in two normalizations, per Bob detection
in the key basis or per photon pair emitted by the source; see
``bounds_report`` and ``scenario_table``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CHSH_MAX = 2.0 * math.sqrt(2.0)
RATE_SLACK = 1e-9

BOUND_FAMILIES = ("sqkd_r0", "onesided_ps_r1", "onesided_nops", "di_mpa", "di_ps_r2")
SCENARIOS = ("onesided", "di", "di_pm")

PER_BOB_DETECTION = "per_bob_detection"
PER_PAIR = "per_pair"


def _check_unit(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def _check_error_rate(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 0.5 + RATE_SLACK:
        raise ValueError(f"{name} must lie in [0, 1/2], got {value}")
    return value


def _check_chsh(value: float) -> float:
    value = float(value)
    if abs(value) > CHSH_MAX + RATE_SLACK:
        raise ValueError(f"CHSH value out of quantum range [-2sqrt2, 2sqrt2]: {value}")
    return value


def binary_entropy(q: float) -> float:
    """h(q) = -q log2 q - (1-q) log2(1-q) in bits, with h(0) = h(1) = 0."""
    q = _check_unit(q, "Q")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


@dataclass(frozen=True)
class ChannelParams:
    """Depolarizing-channel visibility and device efficiencies.

    eta_a is the probability that Alice registers an outcome given that Bob
    did (or her preparation efficiency in prepare-and-measure readings),
    eta_b the same for Bob, and q measures how incompatible Bob's two
    measurements are: q = 1 for mutually unbiased qubit bases.
    """

    V: float
    eta_a: float = 1.0
    eta_b: float = 1.0
    q: float = 1.0

    def __post_init__(self) -> None:
        for name in ("V", "eta_a", "eta_b", "q"):
            object.__setattr__(self, name, _check_unit(getattr(self, name), name))


@dataclass(frozen=True)
class ErrorRates:
    """Bit error rates and CHSH value of one protocol configuration.

    q1_ps and q2_ps are post-selected on coincident detections; q1 and q2
    are not.  q2 and q2_ps are None in the device-independent scenario,
    which has no second key basis.
    """

    q1_ps: float
    q2: float | None
    q1: float
    q2_ps: float | None
    s: float

    def __post_init__(self) -> None:
        for name in ("q1_ps", "q2", "q1", "q2_ps"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _check_error_rate(value, name))
        object.__setattr__(self, "s", _check_chsh(self.s))


def rate_1sdi_ps(q1_ps: float, q2: float, eta_a: float, q: float = 1.0) -> float:
    """Post-selected one-sided DI rate, per Bob detection in the key basis:
    eta_a [1 - h(q1_ps)] - h(q2) - (1 - q)."""
    q1_ps = _check_error_rate(q1_ps, "q1_ps")
    q2 = _check_error_rate(q2, "q2")
    eta_a = _check_unit(eta_a, "eta_a")
    q = _check_unit(q, "q")
    return eta_a * (1.0 - binary_entropy(q1_ps)) - binary_entropy(q2) - (1.0 - q)


def rate_1sdi_nops(q1: float, q2: float) -> float:
    """Non-post-selected one-sided DI rate per Bob detection: 1 - h(q1) - h(q2)."""
    q1 = _check_error_rate(q1, "q1")
    q2 = _check_error_rate(q2, "q2")
    return 1.0 - binary_entropy(q1) - binary_entropy(q2)


def rate_sqkd_r0(q1_ps: float, q2_ps: float, eta_a: float, eta_b: float) -> float:
    """Standard-QKD rate per pair: eta_b eta_a [1 - h(q1_ps) - h(q2_ps)]."""
    q1_ps = _check_error_rate(q1_ps, "q1_ps")
    q2_ps = _check_error_rate(q2_ps, "q2_ps")
    eta_a = _check_unit(eta_a, "eta_a")
    eta_b = _check_unit(eta_b, "eta_b")
    return eta_b * eta_a * (1.0 - binary_entropy(q1_ps) - binary_entropy(q2_ps))


def chsh_eve_term(s: float) -> float:
    """Eve-information penalty log2[1 + sqrt(2 - (S/2)^2)] at CHSH value S."""
    s = _check_chsh(s)
    return math.log2(1.0 + math.sqrt(max(2.0 - (s / 2.0) ** 2, 0.0)))


def rate_di_mpa(q1: float, s: float) -> float:
    """Device-independent rate from non-post-selected data:
    1 - h(q1) - log2[1 + sqrt(2 - (S/2)^2)]."""
    q1 = _check_error_rate(q1, "q1")
    return 1.0 - binary_entropy(q1) - chsh_eve_term(s)


def rate_di_ps_r2(q1_ps: float, s: float, eta_a: float, eta_b: float) -> float:
    """Device-independent rate with the key post-selected on coincidences,
    per pair: eta_a eta_b [1 - h(q1_ps)] - log2[1 + sqrt(2 - (S/2)^2)].
    S is still estimated from the whole non-post-selected data."""
    q1_ps = _check_error_rate(q1_ps, "q1_ps")
    eta_a = _check_unit(eta_a, "eta_a")
    eta_b = _check_unit(eta_b, "eta_b")
    return eta_a * eta_b * (1.0 - binary_entropy(q1_ps)) - chsh_eve_term(s)


def model_error_rates(params: ChannelParams, scenario: str = "onesided") -> ErrorRates:
    """Closed-form error rates for a depolarizing channel with lossy detectors.

    onesided: q1_ps = q2_ps = (1-V)/2, q1 = q2 = (1 - eta_a V)/2.  The
    CHSH value is 0 for matched sigma_z/sigma_x settings and is reported
    as such.

    di: both parties substitute the same predetermined random bits on
    missed detections, giving q1 = [1 - (1-eta_a)(1-eta_b) - V eta_a eta_b]/2
    and S = 2 sqrt(2) V eta_a eta_b + 2 (1-eta_a)(1-eta_b), with
    q1_ps = (1-V)/2 on the coincident subset.  There is no second key
    basis, so q2 and q2_ps are None.

    di_pm: the di model in the prepare-and-measure limit eta_b* -> 1.
    """
    v, ea = params.V, params.eta_a
    if scenario == "onesided":
        q_ps = (1.0 - v) / 2.0
        q_full = (1.0 - ea * v) / 2.0
        return ErrorRates(q1_ps=q_ps, q2=q_full, q1=q_full, q2_ps=q_ps, s=0.0)
    if scenario in ("di", "di_pm"):
        eb = 1.0 if scenario == "di_pm" else params.eta_b
        q1 = (1.0 - (1.0 - ea) * (1.0 - eb) - v * ea * eb) / 2.0
        s = CHSH_MAX * v * ea * eb + 2.0 * (1.0 - ea) * (1.0 - eb)
        return ErrorRates(q1_ps=(1.0 - v) / 2.0, q2=None, q1=q1, q2_ps=None, s=s)
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


def steering_margin_s1(q1_ps: float, q2: float, eta_a: float, q: float = 1.0) -> float:
    """Margin of the detection-aware steering inequality
    eta_a h(q1_ps) + h(q2) + (1 - eta_a) >= q; positive means steering.

    Algebraically identical to rate_1sdi_ps at the same inputs, so the two
    always share a sign.
    """
    q1_ps = _check_error_rate(q1_ps, "q1_ps")
    q2 = _check_error_rate(q2, "q2")
    eta_a = _check_unit(eta_a, "eta_a")
    q = _check_unit(q, "q")
    return q - (eta_a * binary_entropy(q1_ps) + binary_entropy(q2) + (1.0 - eta_a))


def steering_margin_two_setting(q1_ps: float, q2_ps: float, eta_a: float) -> float:
    """Margin of the two-setting steering inequality
    eta_a [2 - h(q1_ps) - h(q2_ps)] <= 1; positive means steering.

    At q1_ps = q2_ps = 0 the sign changes exactly at eta_a = 1/2, the
    lowest efficiency at which two settings can show steering.
    """
    q1_ps = _check_error_rate(q1_ps, "q1_ps")
    q2_ps = _check_error_rate(q2_ps, "q2_ps")
    eta_a = _check_unit(eta_a, "eta_a")
    return eta_a * (2.0 - binary_entropy(q1_ps) - binary_entropy(q2_ps)) - 1.0


def conditional_entropy_bound(q: float) -> float:
    """Upper bound h(Q) on H(B|A) for binary A, B with error rate Q = P(A != B)."""
    q = _check_unit(q, "Q")
    return binary_entropy(min(q, 1.0 - q))


def conditional_entropy(joint) -> float:
    """H(B|A) in bits from a 2x2 array of joint probabilities p[a, b]."""
    p = np.asarray(joint, dtype=float)
    if p.shape != (2, 2) or p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("joint must be a 2x2 probability table summing to 1")
    total = 0.0
    for a in (0, 1):
        pa = p[a].sum()
        if pa <= 0.0:
            continue
        total += pa * binary_entropy(p[a, 1] / pa)
    return total


@dataclass(frozen=True)
class KeyRateReport:
    """Every bound family evaluated at one channel model, plus steering margins."""

    rates: dict
    steering_margin_s1: float
    steering_margin_two_setting: float
    normalization: str


def bounds_report(params: ChannelParams, normalization: str = PER_BOB_DETECTION) -> KeyRateReport:
    """Evaluate all five bound families at the closed-form channel model.

    Under per_bob_detection the one-sided families keep their defining
    normalization (secret bits per Bob detection in the key basis) and the
    BB84-style rate drops its eta_b factor; per_pair multiplies those three
    by eta_b.  The DI families discard nothing (missed detections are
    substituted), so their values coincide under both conventions.
    """
    if normalization not in (PER_BOB_DETECTION, PER_PAIR):
        raise ValueError(f"unknown normalization {normalization!r}")
    one = model_error_rates(params, "onesided")
    di = model_error_rates(params, "di")
    r0 = params.eta_a * (1.0 - binary_entropy(one.q1_ps) - binary_entropy(one.q2_ps))
    r1 = rate_1sdi_ps(one.q1_ps, one.q2, params.eta_a, params.q)
    nops = rate_1sdi_nops(one.q1, one.q2)
    if normalization == PER_PAIR:
        r0 *= params.eta_b
        r1 *= params.eta_b
        nops *= params.eta_b
    rates = {
        "sqkd_r0": r0,
        "onesided_ps_r1": r1,
        "onesided_nops": nops,
        "di_mpa": rate_di_mpa(di.q1, di.s),
        "di_ps_r2": rate_di_ps_r2(di.q1_ps, di.s, params.eta_a, params.eta_b),
    }
    return KeyRateReport(
        rates=rates,
        steering_margin_s1=steering_margin_s1(one.q1_ps, one.q2, params.eta_a, params.q),
        steering_margin_two_setting=steering_margin_two_setting(one.q1_ps, one.q2_ps, params.eta_a),
        normalization=normalization,
    )


@dataclass(frozen=True)
class ScenarioRow:
    """One row of the trust-scenario table (per-pair normalization).

    trust lists T/U flags for (Alice detector, Alice-side channel, source,
    Bob-side channel, Bob detector); threshold_id names the rate family and
    free efficiency whose root gives the row's known threshold, or "none".
    """

    row: int
    label: str
    trust: tuple
    family: str
    rate: float
    threshold_id: str


# (label, trust flags, rate family, threshold id) for the seven distinct
# trust scenarios; mirror-image layouts are omitted because privacy
# amplification runs from Bob to Alice.
_SCENARIO_LAYOUT = (
    ("P&M", ("T", "T", "T", "U", "T"), "r0", "none"),
    ("P&M", ("U", "T", "T", "U", "T"), "r1", "onesided_ps_r1:eta_a_star"),
    ("P&M", ("U", "U", "T", "T", "T"), "r1", "onesided_ps_r1:eta_a"),
    ("P&M", ("U", "U", "T", "T", "U"), "r2", "di_ps_r2:eta_a@eta_b=1"),
    ("Entang.", ("T", "U", "U", "U", "T"), "r0", "none"),
    ("Steering", ("U", "U", "U", "U", "T"), "r1", "onesided_ps_r1:eta_a"),
    ("Bell", ("U", "U", "U", "U", "U"), "r2", "di_ps_r2:eta"),
)


def scenario_table(params: ChannelParams) -> list:
    """All seven trust scenarios with their per-pair key-rate bounds.

    Prepare-and-measure rows reuse the entanglement-based rate functions
    with the same parameter fields read as preparation efficiencies, so
    rows sharing a family share a value; they differ in which device the
    efficiency belongs to, recorded in the trust flags and threshold_id.
    """
    one = model_error_rates(params, "onesided")
    di = model_error_rates(params, "di")
    values = {
        "r0": rate_sqkd_r0(one.q1_ps, one.q2_ps, params.eta_a, params.eta_b),
        "r1": params.eta_b * rate_1sdi_ps(one.q1_ps, one.q2, params.eta_a, params.q),
        "r2": rate_di_ps_r2(di.q1_ps, di.s, params.eta_a, params.eta_b),
    }
    rows = []
    for i, (label, trust, family, threshold_id) in enumerate(_SCENARIO_LAYOUT, start=1):
        rows.append(ScenarioRow(i, label, trust, family, values[family], threshold_id))
    return rows
