"""Bit-sharing protocol: random resistor selection, level classification,
discard rules, the bit-inversion convention, and the endpoint-comparison
alarm.

One bit-sharing period works like this: both parties draw a resistor
uniformly, the loop runs for ``gamma`` correlation times, and both ends
measure the mean-square channel voltage and current. The mixed (secure)
permutations sit at the intermediate level; same-valued permutations are
publicly recognizable and discarded. On a kept period each party reads the
shared bit off its own resistor state, with one pre-agreed party inverting
so the two key strings match.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np

from .errors import ExchangeTimeoutError, InvalidParameterError
from .physics import (
    KljnLineConfig,
    LoopSignals,
    PairClass,
    DEFAULT_OVERSAMPLE,
    as_seed_sequence,
    assert_same_grid,
    johnson_rms,
    sample_bandlimited_gaussian,
    solve_loop,
    theoretical_msv,
)


class Resistor(Enum):
    """One party's resistor state for a period; L carries bit 0, H bit 1."""

    L = 0
    H = 1

    @property
    def bit(self) -> int:
        return self.value


class Party(Enum):
    ALICE = "alice"
    BOB = "bob"


class Level(Enum):
    """Classified mean-square level band of one period."""

    LOW = "low"
    MID = "mid"
    HIGH = "high"


class BitFlag(IntEnum):
    """Per-period provenance of exchanged bit material."""

    SECURE = 0
    DISCARDED_PUBLIC = 1
    COMPROMISED = 2


#: Channels a period may be classified on.
CLASSIFY_MODES = ("voltage", "current", "both")


def pair_of(alice: Resistor, bob: Resistor) -> PairClass:
    return PairClass(alice.name + bob.name)


def expected_level(pair: PairClass) -> Level:
    """Ground-truth level band implied by a resistor permutation."""
    if pair is PairClass.LL:
        return Level.LOW
    if pair is PairClass.HH:
        return Level.HIGH
    return Level.MID


def _geometric_mean(a: float, b: float) -> float:
    return math.sqrt(a * b)


@dataclass(frozen=True)
class ExchangeConfig:
    """Protocol parameters for one exchange session.

    ``gamma`` is the ratio of noise bandwidth to bit rate: each bit-sharing
    period spans ``gamma`` correlation times, so larger values average the
    level estimate harder and misclassify less. Thresholds default to the
    geometric means of the adjacent theoretical levels and may be overridden;
    they must stay strictly ordered and bracketed by the extreme levels.

    ``classify_on`` selects the measurement channel: "voltage", "current",
    or "both" (default). With "both", a period counts as secure only when the
    voltage and current estimates both vote for the intermediate band, which
    suppresses the single-channel tail misclassifications that would
    otherwise corrupt keys.
    """

    line: KljnLineConfig = field(default_factory=KljnLineConfig)
    gamma: float = 100.0
    oversample: float = DEFAULT_OVERSAMPLE
    voltage_thresholds: tuple[float, float] | None = None
    current_thresholds: tuple[float, float] | None = None
    alarm_tolerance: float = 1e-9
    inverting_party: Party = Party.BOB
    classify_on: str = "both"
    timeout_factor: float = 100.0

    def __post_init__(self) -> None:
        if self.gamma < 1:
            raise InvalidParameterError("gamma must be at least 1")
        if self.oversample < 2:
            raise InvalidParameterError("oversample must be at least 2 (anti-aliasing)")
        if self.alarm_tolerance < 0:
            raise InvalidParameterError("alarm_tolerance must be non-negative")
        if self.timeout_factor < 1:
            raise InvalidParameterError("timeout_factor must be at least 1")
        if self.classify_on not in CLASSIFY_MODES:
            raise InvalidParameterError(
                f"classify_on must be one of {CLASSIFY_MODES}, got {self.classify_on!r}"
            )
        if not isinstance(self.inverting_party, Party):
            raise InvalidParameterError("inverting_party must be a Party")

        u_low, i_low = theoretical_msv(self.line, PairClass.LL)
        u_mid, i_mid = theoretical_msv(self.line, PairClass.LH)
        u_high, i_high = theoretical_msv(self.line, PairClass.HH)

        if self.voltage_thresholds is None:
            object.__setattr__(
                self,
                "voltage_thresholds",
                (_geometric_mean(u_low, u_mid), _geometric_mean(u_mid, u_high)),
            )
        if self.current_thresholds is None:
            # On the current channel the level ordering flips: HH is lowest.
            object.__setattr__(
                self,
                "current_thresholds",
                (_geometric_mean(i_high, i_mid), _geometric_mean(i_mid, i_low)),
            )

        v1, v2 = self.voltage_thresholds
        if not (u_low < v1 < v2 < u_high):
            raise InvalidParameterError(
                "voltage thresholds must be strictly ordered and bracketed by the "
                "theoretical LL and HH voltage levels"
            )
        c1, c2 = self.current_thresholds
        if not (i_high < c1 < c2 < i_low):
            raise InvalidParameterError(
                "current thresholds must be strictly ordered and bracketed by the "
                "theoretical HH and LL current levels"
            )

    @property
    def bit_period(self) -> float:
        """Duration of one bit-sharing period in seconds (gamma / bandwidth)."""
        return self.gamma / self.line.noise_bandwidth

    @property
    def sample_rate(self) -> float:
        return self.oversample * self.line.noise_bandwidth

    @property
    def flags(self) -> tuple[str, ...]:
        """Advisory flags; 'low-gamma' below the comfortable averaging regime."""
        out = list(self.line.flags)
        if self.gamma < 10:
            out.append("low-gamma")
        return tuple(out)


@dataclass(frozen=True)
class BitPeriodRecord:
    """Everything produced by one bit-sharing period."""

    alice_choice: Resistor
    bob_choice: Resistor
    msv_u: float
    msv_i: float
    classified: Level
    kept: bool
    alice_bit: int | None
    bob_bit: int | None
    alarm: bool

    @property
    def pair(self) -> PairClass:
        return pair_of(self.alice_choice, self.bob_choice)


@dataclass(frozen=True, eq=False)
class KeyMaterial:
    """An ordered secure bit string plus per-period provenance.

    ``bits`` holds only the bits flagged SECURE; ``flags`` records one entry
    per bit-sharing period of the generating run and ``secure_periods`` maps
    each key bit back to its period.
    """

    bits: np.ndarray
    flags: np.ndarray
    secure_periods: np.ndarray

    def __post_init__(self) -> None:
        secure = int(np.count_nonzero(self.flags == BitFlag.SECURE))
        if len(self.bits) != secure or len(self.secure_periods) != secure:
            raise InvalidParameterError(
                "key bits must correspond one-to-one with SECURE-flagged periods"
            )

    @classmethod
    def from_bits(cls, bits) -> "KeyMaterial":
        """Wrap a plain bit array (all bits secure), e.g. a donated key."""
        arr = np.asarray(bits, dtype=np.uint8)
        return cls(
            bits=arr,
            flags=np.full(len(arr), BitFlag.SECURE, dtype=np.int8),
            secure_periods=np.arange(len(arr)),
        )

    @property
    def length(self) -> int:
        return len(self.bits)

    def hex(self) -> str:
        """Key bits packed most-significant-bit first, zero-padded at the end."""
        if self.length == 0:
            return ""
        return np.packbits(self.bits).tobytes().hex()

    def __eq__(self, other) -> bool:
        if not isinstance(other, KeyMaterial):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


@dataclass
class ExchangeStats:
    """Aggregate outcome counters for a run of bit-sharing periods."""

    pair_counts: dict
    misclassified: int
    alarms: int
    periods: int
    kept_bits: int
    elapsed_s: float

    @property
    def secure_fraction(self) -> float:
        """Ground-truth fraction of mixed (secure) permutations."""
        if self.periods == 0:
            return 0.0
        mixed = self.pair_counts[PairClass.LH] + self.pair_counts[PairClass.HL]
        return mixed / self.periods


def choose_resistors(rng: np.random.Generator) -> tuple[Resistor, Resistor]:
    """Both parties draw a resistor uniformly and independently."""
    draws = rng.integers(0, 2, size=2)
    return Resistor(int(draws[0])), Resistor(int(draws[1]))


def classify_level(msv_u: float, thresholds: tuple[float, float]) -> Level:
    """Classify a mean-square voltage into LOW/MID/HIGH bands.

    A value exactly at a threshold belongs to the band below it.
    """
    if msv_u < 0:
        raise InvalidParameterError("mean-square value must be non-negative")
    lower, upper = thresholds
    if msv_u <= lower:
        return Level.LOW
    if msv_u <= upper:
        return Level.MID
    return Level.HIGH


def _classify_from_current(msv_i: float, thresholds: tuple[float, float]) -> Level:
    # Same closed-below convention, applied on the current axis where the
    # band order is reversed (HH has the lowest mean-square current).
    if msv_i < 0:
        raise InvalidParameterError("mean-square value must be non-negative")
    lower, upper = thresholds
    if msv_i <= lower:
        return Level.HIGH
    if msv_i <= upper:
        return Level.MID
    return Level.LOW


def classify_period(config: ExchangeConfig, msv_u: float, msv_i: float) -> Level:
    """Classify one period according to the configured channel(s).

    In "both" mode the period is MID only if voltage and current agree on
    MID; a lone non-MID vote wins, and on the (practically unreachable)
    LOW-vs-HIGH conflict the voltage vote is taken.
    """
    if config.classify_on == "voltage":
        return classify_level(msv_u, config.voltage_thresholds)
    if config.classify_on == "current":
        return _classify_from_current(msv_i, config.current_thresholds)
    by_u = classify_level(msv_u, config.voltage_thresholds)
    by_i = _classify_from_current(msv_i, config.current_thresholds)
    if by_u is by_i:
        return by_u
    if by_u is Level.MID:
        return by_i
    if by_i is Level.MID:
        return by_u
    return by_u


def period_resistances(
    line: KljnLineConfig, choices: tuple[Resistor, Resistor]
) -> tuple[float, float]:
    alice, bob = choices
    lookup = {Resistor.L: line.r_low, Resistor.H: line.r_high}
    return lookup[alice], lookup[bob]


def synthesize_period(
    config: ExchangeConfig, choices: tuple[Resistor, Resistor], seed
) -> LoopSignals:
    """Generate both source traces for one period and solve the loop."""
    r_a, r_b = period_resistances(config.line, choices)
    bw = config.line.noise_bandwidth
    seed_a, seed_b = as_seed_sequence(seed).spawn(2)
    u_a = sample_bandlimited_gaussian(
        johnson_rms(r_a, config.line.t_eff, bw),
        bw,
        config.sample_rate,
        config.bit_period,
        seed_a,
    )
    u_b = sample_bandlimited_gaussian(
        johnson_rms(r_b, config.line.t_eff, bw),
        bw,
        config.sample_rate,
        config.bit_period,
        seed_b,
    )
    return solve_loop(u_a, r_a, u_b, r_b)


def measure_period(
    config: ExchangeConfig,
    choices: tuple[Resistor, Resistor],
    signals: LoopSignals,
    alarm: bool = False,
) -> BitPeriodRecord:
    """Time-average the loop signals, classify, and derive the bits."""
    alice, bob = choices
    msv_u = signals.channel_voltage.mean_square()
    msv_i = signals.channel_current.mean_square()
    classified = classify_period(config, msv_u, msv_i)
    kept = classified is Level.MID
    alice_bit = bob_bit = None
    if kept:
        if config.inverting_party is Party.BOB:
            alice_bit, bob_bit = alice.bit, 1 - bob.bit
        else:
            alice_bit, bob_bit = 1 - alice.bit, bob.bit
    return BitPeriodRecord(
        alice_choice=alice,
        bob_choice=bob,
        msv_u=msv_u,
        msv_i=msv_i,
        classified=classified,
        kept=kept,
        alice_bit=alice_bit,
        bob_bit=bob_bit,
        alarm=alarm,
    )


def run_bit_period(
    config: ExchangeConfig, choices: tuple[Resistor, Resistor], seed
) -> BitPeriodRecord:
    """Run one full bit-sharing period: synthesize, monitor, classify."""
    signals = synthesize_period(config, choices, seed)
    alarm = monitor_endpoints(signals, signals, config.alarm_tolerance)
    return measure_period(config, choices, signals, alarm=alarm)


def monitor_endpoints(
    alice_view: LoopSignals, bob_view: LoopSignals, alarm_tolerance: float
) -> bool:
    """Compare both ends' instantaneous measurements of the line.

    Both parties publish their sampled channel voltage and current; any
    sample pair deviating by more than ``alarm_tolerance`` relative to the
    typical (RMS) amplitude of that channel raises the alarm. On an
    unmodified ideal line the two views are identical and no alarm fires.
    """
    assert_same_grid(alice_view.channel_voltage, bob_view.channel_voltage)
    assert_same_grid(alice_view.channel_current, bob_view.channel_current)
    for mine, theirs in (
        (alice_view.channel_voltage, bob_view.channel_voltage),
        (alice_view.channel_current, bob_view.channel_current),
    ):
        if mine.samples is theirs.samples:
            continue
        worst = float(np.max(np.abs(mine.samples - theirs.samples)))
        if worst == 0.0:
            continue
        scale = max(mine.rms(), theirs.rms())
        if scale == 0.0 or worst / scale > alarm_tolerance:
            return True
    return False


def _blank_stats(config: ExchangeConfig) -> ExchangeStats:
    return ExchangeStats(
        pair_counts={p: 0 for p in PairClass},
        misclassified=0,
        alarms=0,
        periods=0,
        kept_bits=0,
        elapsed_s=0.0,
    )


def _tally(stats: ExchangeStats, record: BitPeriodRecord, config: ExchangeConfig) -> None:
    stats.pair_counts[record.pair] += 1
    stats.periods += 1
    stats.kept_bits += record.kept
    stats.misclassified += record.classified is not expected_level(record.pair)
    stats.alarms += record.alarm
    stats.elapsed_s = stats.periods * config.bit_period


def run_periods(
    config: ExchangeConfig, n_periods: int, seed
) -> tuple[list[BitPeriodRecord], ExchangeStats]:
    """Run a fixed number of bit-sharing periods (no key assembly)."""
    if n_periods < 0:
        raise InvalidParameterError("n_periods must be non-negative")
    root = as_seed_sequence(seed)
    choice_seed, noise_root = root.spawn(2)
    rng = np.random.default_rng(choice_seed)
    records = []
    stats = _blank_stats(config)
    for _ in range(n_periods):
        choices = choose_resistors(rng)
        record = run_bit_period(config, choices, noise_root.spawn(1)[0])
        records.append(record)
        _tally(stats, record, config)
    return records, stats


def run_key_exchange(
    config: ExchangeConfig, target_bits: int, seed
) -> tuple[KeyMaterial, KeyMaterial, ExchangeStats]:
    """Loop bit-sharing periods until both parties hold ``target_bits`` bits.

    Raises ExchangeTimeoutError once ``timeout_factor * 2 * target_bits``
    periods have passed without reaching the target.
    """
    if target_bits < 0:
        raise InvalidParameterError("target_bits must be non-negative")
    root = as_seed_sequence(seed)
    choice_seed, noise_root = root.spawn(2)
    rng = np.random.default_rng(choice_seed)

    stats = _blank_stats(config)
    alice_bits: list[int] = []
    bob_bits: list[int] = []
    flags: list[int] = []
    secure_periods: list[int] = []
    cap = int(math.ceil(config.timeout_factor * 2 * target_bits))

    while len(alice_bits) < target_bits:
        if stats.periods >= cap:
            raise ExchangeTimeoutError(
                f"no {target_bits}-bit key after {stats.periods} bit periods"
            )
        choices = choose_resistors(rng)
        record = run_bit_period(config, choices, noise_root.spawn(1)[0])
        if record.kept:
            secure_periods.append(stats.periods)
            alice_bits.append(record.alice_bit)
            bob_bits.append(record.bob_bit)
            flags.append(BitFlag.SECURE)
        else:
            flags.append(BitFlag.DISCARDED_PUBLIC)
        _tally(stats, record, config)

    flag_arr = np.array(flags, dtype=np.int8)
    period_arr = np.array(secure_periods, dtype=np.int64)
    alice = KeyMaterial(np.array(alice_bits, dtype=np.uint8), flag_arr, period_arr)
    bob = KeyMaterial(np.array(bob_bits, dtype=np.uint8), flag_arr.copy(), period_arr.copy())
    return alice, bob, stats


@dataclass(frozen=True)
class BerEstimate:
    gamma: float
    runs: int
    errors: int
    ber: float


def estimate_ber(
    config: ExchangeConfig, gamma_list, runs_per_gamma: int, seed
) -> list[BerEstimate]:
    """Monte Carlo misclassification probability per averaging ratio.

    For each gamma, runs ``runs_per_gamma`` independent periods with uniform
    ground truth and counts periods whose classified band differs from the
    band implied by the true permutation. Deterministic under a fixed seed.
    """
    if runs_per_gamma < 100:
        raise InvalidParameterError("runs_per_gamma must be at least 100")
    root = as_seed_sequence(seed)
    out = []
    for gamma in gamma_list:
        cfg = replace(config, gamma=float(gamma))
        choice_seed, noise_root = root.spawn(1)[0].spawn(2)
        rng = np.random.default_rng(choice_seed)
        errors = 0
        for _ in range(runs_per_gamma):
            choices = choose_resistors(rng)
            record = run_bit_period(cfg, choices, noise_root.spawn(1)[0])
            errors += record.classified is not expected_level(record.pair)
        out.append(BerEstimate(float(gamma), runs_per_gamma, errors, errors / runs_per_gamma))
    return out
