"""Efficiency thresholds and rate curves over the closed-form bounds.

Root finding is a sign-change prescan over 1000 cells followed by plain
bisection; entropy derivatives blow up as error rates approach 0, which
makes derivative-based methods fragile near the V = 1 endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .rates import (
    BOUND_FAMILIES,
    ChannelParams,
    model_error_rates,
    rate_1sdi_nops,
    rate_1sdi_ps,
    rate_di_mpa,
    rate_di_ps_r2,
    rate_sqkd_r0,
)

FREE_VARIABLES = ("eta_a", "eta_b", "V", "eta")
PRESCAN_CELLS = 1000

# Families whose noise model ties Bob's detector into the CHSH statistics.
_DI_FAMILIES = ("di_mpa", "di_ps_r2")


def family_rate(family: str, params: ChannelParams) -> float:
    """Rate of one bound family at the closed-form model for params."""
    if family == "onesided_ps_r1":
        m = model_error_rates(params, "onesided")
        return rate_1sdi_ps(m.q1_ps, m.q2, params.eta_a, params.q)
    if family == "onesided_nops":
        m = model_error_rates(params, "onesided")
        return rate_1sdi_nops(m.q1, m.q2)
    if family == "sqkd_r0":
        m = model_error_rates(params, "onesided")
        return rate_sqkd_r0(m.q1_ps, m.q2_ps, params.eta_a, params.eta_b)
    if family == "di_mpa":
        m = model_error_rates(params, "di")
        return rate_di_mpa(m.q1, m.s)
    if family == "di_ps_r2":
        m = model_error_rates(params, "di")
        return rate_di_ps_r2(m.q1_ps, m.s, params.eta_a, params.eta_b)
    raise ValueError(f"unknown bound family {family!r}; expected one of {BOUND_FAMILIES}")


@dataclass(frozen=True)
class ThresholdQuery:
    """A root-finding request: which bound, which variable scans [0, 1]."""

    family: str
    params: ChannelParams
    free: str = "eta_a"
    tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if self.family not in BOUND_FAMILIES:
            raise ValueError(f"unknown bound family {self.family!r}")
        if self.free not in FREE_VARIABLES:
            raise ValueError(f"free variable must be one of {FREE_VARIABLES}, got {self.free!r}")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")


def _with_free(params: ChannelParams, free: str, x: float) -> ChannelParams:
    if free == "eta":
        return replace(params, eta_a=x, eta_b=x)
    return replace(params, **{free: x})


def find_threshold(query: ThresholdQuery):
    """Smallest value of the free variable where the rate turns positive.

    Scans [0, 1] in PRESCAN_CELLS cells for the first sign change, then
    bisects it to the requested tolerance.  Returns None when the rate is
    never positive, and 0.0 when it is already positive at 0.
    """
    def rate(x: float) -> float:
        return family_rate(query.family, _with_free(query.params, query.free, x))

    xs = [i / PRESCAN_CELLS for i in range(PRESCAN_CELLS + 1)]
    values = [rate(x) for x in xs]
    if all(v <= 0.0 for v in values):
        return None
    first_pos = next(i for i, v in enumerate(values) if v > 0.0)
    if first_pos == 0:
        return 0.0
    lo, hi = xs[first_pos - 1], xs[first_pos]
    while hi - lo > query.tolerance:
        mid = 0.5 * (lo + hi)
        if rate(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CurveSpec:
    """A rate-vs-efficiency sweep for a list of visibilities.

    eta_grid is (lo, hi, step) over the scanned efficiency: Alice's for the
    one-sided and standard-QKD families, both parties' for the DI families.
    """

    family: str
    v_list: tuple
    eta_grid: tuple
    q: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in BOUND_FAMILIES:
            raise ValueError(f"unknown bound family {self.family!r}")
        object.__setattr__(self, "v_list", tuple(float(v) for v in self.v_list))
        if not self.v_list:
            raise ValueError("v_list must not be empty")
        if any(not 0.0 <= v <= 1.0 for v in self.v_list):
            raise ValueError("visibilities must lie in [0, 1]")
        lo, hi, step = (float(x) for x in self.eta_grid)
        if not (0.0 <= lo <= hi <= 1.0 and step > 0.0):
            raise ValueError("eta_grid must satisfy 0 <= lo <= hi <= 1 with step > 0")
        object.__setattr__(self, "eta_grid", (lo, hi, step))


def curve(spec: CurveSpec) -> list:
    """Dense (V, eta, rate) table over the grid; negative rates are kept."""
    lo, hi, step = spec.eta_grid
    count = int(round((hi - lo) / step))
    etas = [min(lo + i * step, hi) for i in range(count + 1)]
    ties_eta_b = spec.family in _DI_FAMILIES
    rows = []
    for v in spec.v_list:
        for eta in etas:
            params = ChannelParams(V=v, eta_a=eta, eta_b=eta if ties_eta_b else 1.0, q=spec.q)
            rows.append((v, eta, family_rate(spec.family, params)))
    return rows


def curve_to_csv(rows) -> str:
    """CSV with header V,eta,rate, fixed 6-decimal fields and LF endings."""
    lines = ["V,eta,rate"]
    for v, eta, rate in rows:
        lines.append(f"{v:.6f},{eta:.6f},{rate:.6f}")
    return "\n".join(lines) + "\n"
