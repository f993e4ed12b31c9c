"""Seeded Monte Carlo simulation of entanglement-based QKD rounds.

A round samples a joint Born outcome for the chosen setting pair on the
depolarized Bell state, applies detector loss and dark clicks, squashes
Bob's two counters to a bit, and applies the substitution rule on missed
detections.  In the one-sided scenario rounds without a Bob detection are
dropped (his detector is trusted); in the device-independent scenario both
parties substitute bits from the same predetermined random list, so every
round is retained.

Everything is deterministic given the config, including the seed and the
worker count: each worker draws from an independent stream derived from
(seed, worker index) and the tally merge is associative.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .quantum import DIAG_MINUS, DIAG_PLUS, SIGMA_X, SIGMA_Z, bell_phi_plus, born_joint, depolarize
from .rates import ChannelParams, ErrorRates, binary_entropy

SCENARIO_ONESIDED = "onesided"
SCENARIO_DI = "di"
SCENARIOS = (SCENARIO_ONESIDED, SCENARIO_DI)

SUBSTITUTION_LIST = "predetermined_list"
SUBSTITUTION_ZERO = "fixed_zero"
SUBSTITUTIONS = (SUBSTITUTION_LIST, SUBSTITUTION_ZERO)

BOB_SETTINGS = (1, 2)
# Alice's settings per scenario.  The DI protocol needs a dedicated key
# setting (0, aligned with Bob's key basis) plus the two CHSH settings.
ALICE_SETTINGS = {SCENARIO_ONESIDED: (1, 2), SCENARIO_DI: (0, 1, 2)}
ALICE_KEY_SETTING = {SCENARIO_ONESIDED: 1, SCENARIO_DI: 0}

_ALICE_OBSERVABLES = {
    SCENARIO_ONESIDED: {1: SIGMA_Z, 2: SIGMA_X},
    SCENARIO_DI: {0: SIGMA_Z, 1: DIAG_PLUS, 2: DIAG_MINUS},
}
_BOB_OBSERVABLES = {1: SIGMA_Z, 2: SIGMA_X}


class InsufficientStatisticsError(RuntimeError):
    """A tally lacks counts in a cell class required for an estimate."""


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulation run."""

    params: ChannelParams
    rounds: int
    seed: int
    basis_bias: float = 0.5
    scenario: str = SCENARIO_ONESIDED
    dark_click_prob: float = 0.0
    alice_substitution: str = SUBSTITUTION_LIST
    workers: int = 1

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0.0 < self.basis_bias < 1.0:
            raise ValueError("basis_bias must lie strictly inside (0, 1)")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not 0.0 <= self.dark_click_prob <= 1.0:
            raise ValueError("dark_click_prob must lie in [0, 1]")
        if self.alice_substitution not in SUBSTITUTIONS:
            raise ValueError(f"alice_substitution must be one of {SUBSTITUTIONS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class RoundRecord:
    """One protocol round before any rounds are dropped.

    alice_bit is the substituted bit when alice_detected is False.  bob_bit
    is None when Bob has no detection in the one-sided scenario and the
    substituted bit in the DI scenario.
    """

    alice_setting: int
    bob_setting: int
    alice_bit: int
    alice_detected: bool
    bob_bit: int | None
    bob_detected: bool
    bob_double_click: bool


@dataclass
class OutcomeTally:
    """Joint outcome counts per setting pair over the retained rounds.

    counts[a_idx, b_idx, a_bit, a_det, b_bit, b_det] with a_idx indexing
    alice_settings and b_idx indexing Bob's settings (1, 2).  One-sided
    tallies only ever populate b_det = 1.
    """

    scenario: str
    counts: np.ndarray

    @property
    def alice_settings(self) -> tuple:
        return ALICE_SETTINGS[self.scenario]

    @classmethod
    def empty(cls, scenario: str) -> "OutcomeTally":
        shape = (len(ALICE_SETTINGS[scenario]), 2, 2, 2, 2, 2)
        return cls(scenario, np.zeros(shape, dtype=np.int64))

    def merge(self, other: "OutcomeTally") -> "OutcomeTally":
        if other.scenario != self.scenario:
            raise ValueError("cannot merge tallies from different scenarios")
        return OutcomeTally(self.scenario, self.counts + other.counts)

    def pair(self, a_setting: int, b_setting: int) -> np.ndarray:
        """Counts for one setting pair: axes (a_bit, a_det, b_bit, b_det)."""
        return self.counts[self.alice_settings.index(a_setting), b_setting - 1]

    def error_count(self, a_setting: int, b_setting: int, coincident: bool = False):
        """(mismatches, total) for a setting pair, optionally post-selected
        on both parties having detected."""
        block = self.pair(a_setting, b_setting)
        table = block[:, 1, :, 1] if coincident else block.sum(axis=(1, 3))
        mismatches = int(table[0, 1] + table[1, 0])
        return mismatches, int(table.sum())

    def correlator(self, a_setting: int, b_setting: int):
        """(E[a*b], total) over all retained rounds of a setting pair."""
        table = self.pair(a_setting, b_setting).sum(axis=(1, 3))
        total = int(table.sum())
        if total == 0:
            raise InsufficientStatisticsError(
                f"no rounds tallied for setting pair ({a_setting}, {b_setting})"
            )
        agree = int(table[0, 0] + table[1, 1])
        return (2.0 * agree - total) / total, total

    @property
    def key_pair(self) -> tuple:
        return (ALICE_KEY_SETTING[self.scenario], 1)

    @property
    def N(self) -> int:
        """Bob-detected rounds of the key setting pair."""
        a, b = self.key_pair
        return int(self.pair(a, b)[:, :, :, 1].sum())

    @property
    def n(self) -> int:
        """Coincident subset of N (Alice detected as well)."""
        a, b = self.key_pair
        return int(self.pair(a, b)[:, 1, :, 1].sum())

    def total_rounds(self) -> int:
        return int(self.counts.sum())


def tally_to_csv(tally: OutcomeTally) -> str:
    """CSV dump: one row per setting-pair cell, header
    alice_setting,bob_setting,a_bit,a_detected,b_bit,count.

    Counts are aggregated over Bob's detection flag; in the one-sided
    scenario every tallied round has a Bob detection anyway.
    """
    lines = ["alice_setting,bob_setting,a_bit,a_detected,b_bit,count"]
    collapsed = tally.counts.sum(axis=5)
    for ai, a_setting in enumerate(tally.alice_settings):
        for bi, b_setting in enumerate(BOB_SETTINGS):
            for a_bit in (0, 1):
                for a_det in (0, 1):
                    for b_bit in (0, 1):
                        count = int(collapsed[ai, bi, a_bit, a_det, b_bit])
                        lines.append(
                            f"{a_setting},{b_setting},{a_bit},{a_det},{b_bit},{count}"
                        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SiftedStrings:
    """Bit strings sifted from the key and check bases.

    The *_ps strings hold the coincident-detection rounds of the key
    setting pair and the *_dis strings the rounds where only Bob detected.
    a2/b2 hold the check-basis rounds with a Bob detection (empty in the DI
    scenario, which has no second key basis).
    """

    a1_ps: np.ndarray
    b1_ps: np.ndarray
    a1_dis: np.ndarray
    b1_dis: np.ndarray
    a2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        if len(self.a1_ps) != len(self.b1_ps) or len(self.a1_dis) != len(self.b1_dis):
            raise ValueError("paired strings must have matching lengths")
        if len(self.a2) != len(self.b2):
            raise ValueError("paired strings must have matching lengths")


def strings_to_csv(strings: SiftedStrings) -> str:
    """CSV dump of the sifted strings: segment,index,a_bit,b_bit."""
    lines = ["segment,index,a_bit,b_bit"]
    for segment, a, b in (
        ("ps", strings.a1_ps, strings.b1_ps),
        ("dis", strings.a1_dis, strings.b1_dis),
        ("basis2", strings.a2, strings.b2),
    ):
        for i, (abit, bbit) in enumerate(zip(a, b)):
            lines.append(f"{segment},{i},{int(abit)},{int(bbit)}")
    return "\n".join(lines) + "\n"


def squash_bob(raw_clicks, rng) -> tuple:
    """Map Bob's two counter clicks to (bob_bit, detected, double_click).

    A single click on counter 0 gives bit 0, on counter 1 bit 1; a double
    click gives a uniformly random bit; no click means no detection (the
    returned bit is 0 and meaningless).
    """
    c0, c1 = bool(raw_clicks[0]), bool(raw_clicks[1])
    if c0 and c1:
        return int(rng.integers(0, 2)), True, True
    if c0:
        return 0, True, False
    if c1:
        return 1, True, False
    return 0, False, False


def _joint_cdfs(config: SimConfig) -> dict:
    """Cumulative Born distributions per setting pair.

    Outcome index is 2*a_bit + b_bit with bit 0 for outcome +1.
    """
    state = depolarize(bell_phi_plus(), config.params.V)
    a_obs = _ALICE_OBSERVABLES[config.scenario]
    cdfs = {}
    for a_setting, oa in a_obs.items():
        for b_setting, ob in _BOB_OBSERVABLES.items():
            dist = born_joint(state, oa, ob)
            probs = [dist.p[(1, 1)], dist.p[(1, -1)], dist.p[(-1, 1)], dist.p[(-1, -1)]]
            cdf = np.cumsum(probs)
            cdf[-1] = 1.0
            cdfs[(a_setting, b_setting)] = cdf
    return cdfs


def _simulate_chunk(config: SimConfig, worker_index: int, m: int, cdfs: dict) -> dict:
    """Raw per-round arrays for one worker's chunk of m rounds."""
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=config.seed, spawn_key=(worker_index,)))
    )
    params = config.params
    bias = config.basis_bias

    # Fixed draw order keeps streams stable across code paths.
    u_aset = rng.random(m)
    u_bset = rng.random(m)
    u_outcome = rng.random(m)
    u_adet = rng.random(m)
    pre_bits = rng.integers(0, 2, size=m, dtype=np.uint8)
    u_breal = rng.random(m)
    u_dark0 = rng.random(m)
    u_dark1 = rng.random(m)
    dbl_bits = rng.integers(0, 2, size=m, dtype=np.uint8)

    if config.scenario == SCENARIO_ONESIDED:
        a_set = np.where(u_aset < bias, 1, 2).astype(np.int8)
    else:
        a_set = np.where(
            u_aset < bias, 0, np.where(u_aset < bias + (1.0 - bias) / 2.0, 1, 2)
        ).astype(np.int8)
    b_set = np.where(u_bset < bias, 1, 2).astype(np.int8)

    a_born = np.zeros(m, dtype=np.uint8)
    b_born = np.zeros(m, dtype=np.uint8)
    for (a_setting, b_setting), cdf in cdfs.items():
        mask = (a_set == a_setting) & (b_set == b_setting)
        if not mask.any():
            continue
        idx = np.searchsorted(cdf, u_outcome[mask], side="right")
        np.clip(idx, 0, 3, out=idx)
        a_born[mask] = (idx >> 1).astype(np.uint8)
        b_born[mask] = (idx & 1).astype(np.uint8)

    a_det = u_adet < params.eta_a
    if config.alice_substitution == SUBSTITUTION_LIST:
        sub_bits = pre_bits
    else:
        sub_bits = np.zeros(m, dtype=np.uint8)
    a_bit = np.where(a_det, a_born, sub_bits).astype(np.uint8)

    # Bob's counter for the Born outcome clicks with probability eta_b;
    # dark clicks hit each counter independently afterwards.
    real = u_breal < params.eta_b
    c0 = (real & (b_born == 0)) | (u_dark0 < config.dark_click_prob)
    c1 = (real & (b_born == 1)) | (u_dark1 < config.dark_click_prob)
    b_det = c0 | c1
    dbl = c0 & c1
    b_click_bit = np.where(dbl, dbl_bits, np.where(c1 & ~c0, 1, 0)).astype(np.uint8)
    if config.scenario == SCENARIO_DI:
        b_bit = np.where(b_det, b_click_bit, sub_bits).astype(np.uint8)
    else:
        b_bit = b_click_bit

    return {
        "a_set": a_set,
        "b_set": b_set,
        "a_bit": a_bit,
        "a_det": a_det,
        "b_bit": b_bit,
        "b_det": b_det,
        "dbl": dbl,
    }


def _chunk_sizes(rounds: int, workers: int) -> list:
    base, extra = divmod(rounds, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def _tally_chunk(config: SimConfig, arrays: dict) -> np.ndarray:
    settings = ALICE_SETTINGS[config.scenario]
    keep = np.ones(len(arrays["a_set"]), dtype=bool) if config.scenario == SCENARIO_DI else arrays["b_det"]
    a_idx = arrays["a_set"][keep].astype(np.int64) - settings[0]
    b_idx = arrays["b_set"][keep].astype(np.int64) - 1
    flat = np.ravel_multi_index(
        (
            a_idx,
            b_idx,
            arrays["a_bit"][keep],
            arrays["a_det"][keep].astype(np.int64),
            arrays["b_bit"][keep],
            arrays["b_det"][keep].astype(np.int64),
        ),
        (len(settings), 2, 2, 2, 2, 2),
    )
    counts = np.bincount(flat, minlength=len(settings) * 32)
    return counts.reshape((len(settings), 2, 2, 2, 2, 2)).astype(np.int64)


def _strings_chunk(config: SimConfig, arrays: dict) -> tuple:
    key_setting = ALICE_KEY_SETTING[config.scenario]
    key_mask = (arrays["a_set"] == key_setting) & (arrays["b_set"] == 1) & arrays["b_det"]
    ps = key_mask & arrays["a_det"]
    dis = key_mask & ~arrays["a_det"]
    if config.scenario == SCENARIO_ONESIDED:
        basis2 = (arrays["a_set"] == 2) & (arrays["b_set"] == 2) & arrays["b_det"]
    else:
        basis2 = np.zeros(len(arrays["a_set"]), dtype=bool)
    return (
        arrays["a_bit"][ps],
        arrays["b_bit"][ps],
        arrays["a_bit"][dis],
        arrays["b_bit"][dis],
        arrays["a_bit"][basis2],
        arrays["b_bit"][basis2],
    )


def run_rounds(config: SimConfig):
    """Simulate config.rounds rounds; returns (OutcomeTally, SiftedStrings).

    Bit-identical for identical configs.  Round order (and therefore the
    sifted strings) follows worker index, so results are reproducible for a
    fixed worker count.
    """
    cdfs = _joint_cdfs(config)
    sizes = _chunk_sizes(config.rounds, config.workers)

    def work(item):
        widx, m = item
        arrays = _simulate_chunk(config, widx, m, cdfs)
        return _tally_chunk(config, arrays), _strings_chunk(config, arrays)

    items = [(widx, m) for widx, m in enumerate(sizes) if m > 0]
    if config.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(item) for item in items]

    tally = OutcomeTally.empty(config.scenario)
    for counts, _ in results:
        tally = tally.merge(OutcomeTally(config.scenario, counts))
    segments = [np.concatenate([r[1][i] for r in results]) for i in range(6)]
    strings = SiftedStrings(*segments)

    assert tally.n == len(strings.a1_ps)
    assert tally.N == len(strings.a1_ps) + len(strings.a1_dis)
    return tally, strings


def iter_rounds(config: SimConfig):
    """Yield every generated round as a RoundRecord, before any dropping.

    Follows the exact array pipeline of run_rounds, so records are
    consistent with the tally and strings for the same config.
    """
    cdfs = _joint_cdfs(config)
    for widx, m in enumerate(_chunk_sizes(config.rounds, config.workers)):
        if m == 0:
            continue
        arrays = _simulate_chunk(config, widx, m, cdfs)
        for i in range(m):
            detected = bool(arrays["b_det"][i])
            if detected or config.scenario == SCENARIO_DI:
                bob_bit = int(arrays["b_bit"][i])
            else:
                bob_bit = None
            yield RoundRecord(
                alice_setting=int(arrays["a_set"][i]),
                bob_setting=int(arrays["b_set"][i]),
                alice_bit=int(arrays["a_bit"][i]),
                alice_detected=bool(arrays["a_det"][i]),
                bob_bit=bob_bit,
                bob_detected=detected,
                bob_double_click=bool(arrays["dbl"][i]),
            )


def _ratio(counts: tuple, what: str) -> float:
    mismatches, total = counts
    if total == 0:
        raise InsufficientStatisticsError(f"no rounds available to estimate {what}")
    return mismatches / total


def _chsh_estimate(tally: OutcomeTally) -> float:
    e11, _ = tally.correlator(1, 1)
    e12, _ = tally.correlator(1, 2)
    e21, _ = tally.correlator(2, 1)
    e22, _ = tally.correlator(2, 2)
    s = e11 + e12 + e21 - e22
    # The true value is quantum-bounded; at the boundary (perfect devices)
    # sampling noise pushes the raw sum past 2*sqrt(2) half the time, so
    # project onto the physical interval.  Raw correlators stay available
    # through OutcomeTally.correlator.
    limit = 2.0 * math.sqrt(2.0)
    return min(max(s, -limit), limit)


def estimate_rates(tally: OutcomeTally) -> ErrorRates:
    """Empirical error rates and CHSH value from a tally.

    The CHSH estimate is projected onto [-2*sqrt(2), 2*sqrt(2)].  Raises
    InsufficientStatisticsError when a required cell class is empty.
    """
    key_a, key_b = tally.key_pair
    q1_ps = _ratio(tally.error_count(key_a, key_b, coincident=True), "q1_ps")
    q1 = _ratio(tally.error_count(key_a, key_b), "q1")
    if tally.scenario == SCENARIO_ONESIDED:
        q2 = _ratio(tally.error_count(2, 2), "q2")
        q2_ps = _ratio(tally.error_count(2, 2, coincident=True), "q2_ps")
    else:
        q2 = q2_ps = None
    return ErrorRates(q1_ps=q1_ps, q2=q2, q1=q1, q2_ps=q2_ps, s=_chsh_estimate(tally))


def _entropy_cells(table: np.ndarray):
    """(H, variance) for sum_cell p(cell) h(P(b=1|cell)) over rows of an
    (cells, 2) count table, by first-order error propagation."""
    total = table.sum()
    if total == 0:
        raise InsufficientStatisticsError("no rounds available for an entropy estimate")
    value = 0.0
    var = 0.0
    for row in table:
        n_cell = row.sum()
        if n_cell == 0:
            continue
        weight = n_cell / total
        p1 = row[1] / n_cell
        value += weight * binary_entropy(p1)
        if 0.0 < p1 < 1.0:
            slope = math.log2((1.0 - p1) / p1)
            var += (weight * slope) ** 2 * p1 * (1.0 - p1) / n_cell
    return value, var


def steering_entropy_sum(tally: OutcomeTally):
    """Empirical H(B1 | A1, detect-flag) + H(B2 | A2) and its 1-sigma error.

    The key-basis term conditions on Alice's bit and her detection flag;
    the check-basis term conditions on her (possibly substituted) bit
    alone.  Values below q signal steering.  One-sided tallies only.
    """
    if tally.scenario != SCENARIO_ONESIDED:
        raise ValueError("steering entropy sum is defined for the one-sided scenario")
    block1 = tally.pair(1, 1).sum(axis=3)  # (a_bit, a_det, b_bit)
    cells1 = block1.reshape(4, 2)
    h1, var1 = _entropy_cells(cells1)
    block2 = tally.pair(2, 2).sum(axis=(1, 3))  # (a_bit, b_bit)
    h2, var2 = _entropy_cells(block2)
    return h1 + h2, math.sqrt(var1 + var2)


def bits_to_hex(bits: np.ndarray) -> str:
    """Lowercase hex of a bit string, MSB first, zero-padded to whole bytes."""
    if len(bits) == 0:
        return ""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


@dataclass(frozen=True)
class KeyResult:
    """Final keys for both parties after reconciliation and hashing."""

    key_a: np.ndarray
    key_b: np.ndarray
    length: int
    status: str

    @property
    def hex(self) -> str:
        return bits_to_hex(self.key_a)


def _toeplitz_hash(bits: np.ndarray, out_len: int, seed: int) -> np.ndarray:
    """Compress bits to out_len bits with a seeded random binary Toeplitz
    matrix (a two-universal family): T[i, j] = d[i - j + n - 1]."""
    n = len(bits)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed)))
    diagonals = rng.integers(0, 2, size=out_len + n - 1, dtype=np.uint8)
    conv = np.convolve(diagonals.astype(np.int64), np.asarray(bits, dtype=np.int64))
    return (conv[n - 1 : n - 1 + out_len] % 2).astype(np.uint8)


def extract_key(strings: SiftedStrings, rates: ErrorRates, params: ChannelParams, seed: int) -> KeyResult:
    """Reconcile and hash the post-selected key strings.

    The achievable length is floor(n [1 - h(q1_ps)] - N [h(q2) + 1 - q]).
    Error correction is idealized: Bob's string is the reference and
    Alice's copy is corrected at the Shannon-limit leakage n h(q1_ps),
    which the length formula already charges.  Privacy amplification is a
    seeded binary Toeplitz hash, so reruns with the same inputs and seed
    are bit-identical.
    """
    if rates.q2 is None:
        raise ValueError("key extraction needs a check-basis error rate (one-sided scenario)")
    n = len(strings.a1_ps)
    total = n + len(strings.a1_dis)
    length_real = n * (1.0 - binary_entropy(rates.q1_ps)) - total * (
        binary_entropy(rates.q2) + 1.0 - params.q
    )
    length = math.floor(length_real)
    empty = np.zeros(0, dtype=np.uint8)
    if length <= 0:
        return KeyResult(empty, empty, 0, f"no positive key length (l = {length_real:.3f})")

    reconciled_a = strings.b1_ps.astype(np.uint8).copy()
    key_a = _toeplitz_hash(reconciled_a, length, seed)
    key_b = _toeplitz_hash(strings.b1_ps.astype(np.uint8), length, seed)
    # Idealized reconciliation cannot leave a mismatch.
    assert np.array_equal(key_a, key_b)
    return KeyResult(key_a, key_b, length, "ok")
