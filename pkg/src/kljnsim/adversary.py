"""Eavesdropper models: passive wiretap guessing and active current injection.

The passive adversary gets noiseless, full-bandwidth access to the channel
voltage and current. On the ideal line that is provably worthless for
telling the two secure permutations apart: the mixed permutations produce
identical channel statistics and the voltage-current cross-correlation has
zero mean either way. The active adversary injects current at a lumped
mid-line node, which unavoidably makes the two endpoints' current readings
disagree by exactly the injected amount.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParameterError
from .physics import (
    KljnLineConfig,
    LoopSignals,
    NoiseTrace,
    PairClass,
    as_seed_sequence,
    theoretical_msv,
)
from .protocol import (
    BitFlag,
    ExchangeConfig,
    KeyMaterial,
    Resistor,
    choose_resistors,
    measure_period,
    monitor_endpoints,
    period_resistances,
    synthesize_period,
)


class GuessStrategy(str, Enum):
    MSV_THRESHOLD = "msv-threshold"
    CORRELATION_SIGN = "correlation-sign"
    RANDOM = "random"


class Waveform(str, Enum):
    CONSTANT = "constant"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class EveObservation:
    """What a passive wiretapper extracts from one secure-looking period."""

    signals: LoopSignals
    msv_u: float
    msv_i: float
    cross_correlation: float

    @classmethod
    def from_signals(cls, signals: LoopSignals) -> "EveObservation":
        u = signals.channel_voltage.samples
        i = signals.channel_current.samples
        return cls(
            signals=signals,
            msv_u=float(np.mean(u * u)),
            msv_i=float(np.mean(i * i)),
            cross_correlation=float(np.mean(u * i)),
        )


def passive_guess(
    observation: EveObservation,
    strategy,
    *,
    line: KljnLineConfig | None = None,
    rng: np.random.Generator | None = None,
) -> PairClass:
    """Guess the orientation (LH or HL) of a secure period.

    Strategies:

    * ``msv-threshold``: LH when the measured mean-square voltage exceeds the
      theoretical mixed level (requires ``line``). Both orientations share
      the same level, so this cannot beat coin flipping.
    * ``correlation-sign``: LH when the voltage-current cross-correlation is
      positive. The cross-correlation has zero mean for both orientations.
    * ``random``: a coin flip from ``rng``.
    """
    strategy = GuessStrategy(strategy)
    if strategy is GuessStrategy.MSV_THRESHOLD:
        if line is None:
            raise InvalidParameterError("msv-threshold strategy needs the line config")
        level, _ = theoretical_msv(line, PairClass.LH)
        return PairClass.LH if observation.msv_u > level else PairClass.HL
    if strategy is GuessStrategy.CORRELATION_SIGN:
        return PairClass.LH if observation.cross_correlation > 0 else PairClass.HL
    if rng is None:
        raise InvalidParameterError("random strategy needs an rng")
    return PairClass.LH if int(rng.integers(0, 2)) else PairClass.HL


@dataclass(frozen=True)
class InjectionAttack:
    """Current injection at the mid-line node over [start, stop) samples."""

    amplitude: float
    waveform: Waveform = Waveform.CONSTANT
    start: int = 0
    stop: int | None = None

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise InvalidParameterError("injection amplitude must be non-negative")
        if self.start < 0:
            raise InvalidParameterError("attack window start must be non-negative")
        if self.stop is not None and self.stop < self.start:
            raise InvalidParameterError("attack window must not end before it starts")
        object.__setattr__(self, "waveform", Waveform(self.waveform))


def apply_injection(
    loop: LoopSignals,
    r_a: float,
    r_b: float,
    attack: InjectionAttack,
    seed=None,
) -> tuple[LoopSignals, LoopSignals]:
    """Endpoint views of the loop with Eve's current injected mid-line.

    Lumped-node model: the injected current divides between the branches as
    ``alpha = r_b / (r_a + r_b)`` toward one end and ``1 - alpha`` toward the
    other, while the node voltage shifts by the injected current times the
    parallel resistance. Both ends see the same voltage, but their current
    readings now differ by exactly the injected waveform inside the window.
    """
    if r_a <= 0 or r_b <= 0:
        raise InvalidParameterError("resistances must be positive")
    n = len(loop)
    stop = n if attack.stop is None else attack.stop
    if attack.start > n or stop > n:
        raise InvalidParameterError(
            f"attack window [{attack.start}, {stop}) exceeds trace length {n}"
        )
    if attack.amplitude == 0.0 or attack.start == stop:
        untouched = LoopSignals(loop.channel_voltage, loop.channel_current)
        return untouched, untouched

    injected = np.zeros(n)
    width = stop - attack.start
    if attack.waveform is Waveform.CONSTANT:
        injected[attack.start:stop] = attack.amplitude
    else:
        rng = np.random.default_rng(as_seed_sequence(seed))
        injected[attack.start:stop] = attack.amplitude * rng.standard_normal(width)

    alpha = r_b / (r_a + r_b)
    r_parallel = r_a * r_b / (r_a + r_b)
    grid = (loop.sample_rate, loop.duration)
    voltage = NoiseTrace(loop.channel_voltage.samples + injected * r_parallel, *grid)
    i_c = loop.channel_current.samples
    alice = LoopSignals(voltage, NoiseTrace(i_c + alpha * injected, *grid))
    bob = LoopSignals(voltage, NoiseTrace(i_c - (1.0 - alpha) * injected, *grid))
    return alice, bob


@dataclass(frozen=True)
class LeakReport:
    """Outcome of applying the agreed maximum-leak policy to a key pair."""

    alice: KeyMaterial
    bob: KeyMaterial
    discarded: np.ndarray
    compromised_fraction: float

    @property
    def discarded_count(self) -> int:
        return int(np.count_nonzero(self.discarded))


def leak_report(
    alice: KeyMaterial,
    bob: KeyMaterial,
    alarmed_bits,
    max_leak: float,
) -> LeakReport:
    """Apply the pre-agreed information-leak allowance to both keys.

    Bits whose bit-sharing period raised the intrusion alarm count as
    compromised. If the compromised fraction exceeds ``max_leak`` the
    compromised bits are dropped from both keys symmetrically; otherwise the
    parties accept the bounded leak and keep their keys unchanged.
    """
    if not 0.0 <= max_leak <= 1.0:
        raise InvalidParameterError("max_leak must lie in [0, 1]")
    alarmed = np.asarray(alarmed_bits, dtype=bool)
    if len(alarmed) != alice.length or alice.length != bob.length:
        raise InvalidParameterError("alarm mask and keys must have matching lengths")

    fraction = float(alarmed.mean()) if alice.length else 0.0
    if fraction <= max_leak:
        return LeakReport(
            alice=alice,
            bob=bob,
            discarded=np.zeros(alice.length, dtype=bool),
            compromised_fraction=fraction,
        )

    def strip(key: KeyMaterial) -> KeyMaterial:
        flags = key.flags.copy()
        flags[key.secure_periods[alarmed]] = BitFlag.COMPROMISED
        return KeyMaterial(
            bits=key.bits[~alarmed],
            flags=flags,
            secure_periods=key.secure_periods[~alarmed],
        )

    return LeakReport(
        alice=strip(alice),
        bob=strip(bob),
        discarded=alarmed.copy(),
        compromised_fraction=fraction,
    )


@dataclass(frozen=True)
class PassiveSweepResult:
    """Accuracy of each guessing strategy over orientation-balanced periods."""

    periods: int
    correct: dict[GuessStrategy, int]
    accuracy: dict[GuessStrategy, float]
    cross_corr_mean: float
    cross_corr_se: float


def passive_sweep(
    config: ExchangeConfig,
    n_periods: int,
    seed,
    strategies=None,
) -> PassiveSweepResult:
    """Measure every passive strategy on balanced secure periods.

    Generates equal numbers of LH and HL ground-truth periods, keeps only
    those classified as secure, and scores each strategy's orientation
    guesses against the truth. Also accumulates the per-period
    voltage-current cross-correlation whose mean should be statistically
    zero on the ideal line.
    """
    if n_periods < 2:
        raise InvalidParameterError("need at least 2 periods")
    strategies = [GuessStrategy(s) for s in (strategies or list(GuessStrategy))]
    per_orientation = n_periods // 2
    root = as_seed_sequence(seed)
    guess_seed, noise_root = root.spawn(2)
    rng = np.random.default_rng(guess_seed)

    correct = {s: 0 for s in strategies}
    cross: list[float] = []
    counts = {PairClass.LH: 0, PairClass.HL: 0}
    choices_for = {
        PairClass.LH: (Resistor.L, Resistor.H),
        PairClass.HL: (Resistor.H, Resistor.L),
    }
    attempts = 0
    max_attempts = 1000 + 4 * n_periods
    orientation_cycle = (PairClass.LH, PairClass.HL)
    while min(counts.values()) < per_orientation:
        if attempts >= max_attempts:
            raise RuntimeError(
                "could not collect enough secure-classified periods; "
                "check thresholds against the line config"
            )
        truth = orientation_cycle[attempts % 2]
        attempts += 1
        if counts[truth] >= per_orientation:
            continue
        signals = synthesize_period(config, choices_for[truth], noise_root.spawn(1)[0])
        record = measure_period(config, choices_for[truth], signals)
        if not record.kept:
            continue
        counts[truth] += 1
        observation = EveObservation.from_signals(signals)
        cross.append(observation.cross_correlation)
        for strategy in strategies:
            guess = passive_guess(observation, strategy, line=config.line, rng=rng)
            correct[strategy] += guess is truth

    total = 2 * per_orientation
    cross_arr = np.asarray(cross)
    return PassiveSweepResult(
        periods=total,
        correct=correct,
        accuracy={s: c / total for s, c in correct.items()},
        cross_corr_mean=float(cross_arr.mean()),
        cross_corr_se=float(cross_arr.std(ddof=1) / math.sqrt(len(cross_arr))),
    )


@dataclass(frozen=True)
class InjectionSweepPoint:
    relative_amplitude: float
    periods: int
    alarms: int
    alarm_rate: float


def injection_sweep(
    config: ExchangeConfig,
    relative_amplitudes,
    periods_per_amplitude: int,
    seed,
    waveform: Waveform = Waveform.CONSTANT,
) -> list[InjectionSweepPoint]:
    """Alarm rate versus injected current amplitude.

    Each period gets a persistent (full-window) injection whose amplitude is
    the given multiple of the period's theoretical RMS channel current; the
    endpoint monitor then compares the two ends' views.
    """
    if periods_per_amplitude < 1:
        raise InvalidParameterError("periods_per_amplitude must be positive")
    root = as_seed_sequence(seed)
    out = []
    for rel in relative_amplitudes:
        if rel < 0:
            raise InvalidParameterError("relative amplitudes must be >= 0")
        choice_seed, noise_root, attack_root = root.spawn(1)[0].spawn(3)
        rng = np.random.default_rng(choice_seed)
        alarms = 0
        for _ in range(periods_per_amplitude):
            choices = choose_resistors(rng)
            signals = synthesize_period(config, choices, noise_root.spawn(1)[0])
            r_a, r_b = period_resistances(config.line, choices)
            pair = PairClass(choices[0].name + choices[1].name)
            _, msv_i = theoretical_msv(config.line, pair)
            attack = InjectionAttack(rel * math.sqrt(msv_i), waveform)
            alice_view, bob_view = apply_injection(
                signals, r_a, r_b, attack, attack_root.spawn(1)[0]
            )
            alarms += monitor_endpoints(alice_view, bob_view, config.alarm_tolerance)
        out.append(
            InjectionSweepPoint(
                float(rel), periods_per_amplitude, alarms, alarms / periods_per_amplitude
            )
        )
    return out
