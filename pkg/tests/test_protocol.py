"""Bit-sharing protocol: selection, classification, keys, alarm, error rates."""

import dataclasses
import math

import numpy as np
import pytest

from kljnsim import (
    ExchangeConfig,
    ExchangeTimeoutError,
    GridMismatchError,
    InvalidParameterError,
    Level,
    PairClass,
    Party,
    Resistor,
    choose_resistors,
    classify_level,
    estimate_ber,
    monitor_endpoints,
    run_bit_period,
    run_key_exchange,
    run_periods,
    theoretical_msv,
)
from kljnsim.physics import NoiseTrace
from kljnsim.protocol import (
    BitFlag,
    classify_period,
    expected_level,
    pair_of,
    synthesize_period,
)


@pytest.fixture(scope="module")
def config():
    return ExchangeConfig()


class TestChooseResistors:
    def test_all_permutations_near_quarter(self):
        rng = np.random.default_rng(7)
        counts = {p: 0 for p in PairClass}
        n = 10_000
        for _ in range(n):
            a, b = choose_resistors(rng)
            counts[pair_of(a, b)] += 1
        bound = 3 * math.sqrt(0.25 * 0.75 / n)
        for pair, c in counts.items():
            assert abs(c / n - 0.25) <= bound, pair

    def test_secure_fraction_near_half(self):
        rng = np.random.default_rng(8)
        n = 10_000
        mixed = sum(
            pair_of(*choose_resistors(rng)).secure for _ in range(n)
        )
        assert abs(mixed / n - 0.5) <= 3 * math.sqrt(0.25 / n)

    def test_fixed_seed_reproduces(self):
        rng_a, rng_b = np.random.default_rng(3), np.random.default_rng(3)
        for _ in range(100):
            assert choose_resistors(rng_a) == choose_resistors(rng_b)


class TestClassifyLevel:
    def test_theoretical_levels_land_in_their_bands(self, config):
        u_ll, _ = theoretical_msv(config.line, PairClass.LL)
        u_lh, _ = theoretical_msv(config.line, PairClass.LH)
        u_hh, _ = theoretical_msv(config.line, PairClass.HH)
        thr = config.voltage_thresholds
        assert classify_level(u_ll, thr) is Level.LOW
        assert classify_level(u_lh, thr) is Level.MID
        assert classify_level(u_hh, thr) is Level.HIGH

    def test_exact_threshold_belongs_to_band_below(self, config):
        lower, upper = config.voltage_thresholds
        assert classify_level(lower, config.voltage_thresholds) is Level.LOW
        assert classify_level(upper, config.voltage_thresholds) is Level.MID

    def test_negative_value_rejected(self, config):
        with pytest.raises(InvalidParameterError):
            classify_level(-1.0, config.voltage_thresholds)

    def test_classify_period_modes_agree_on_clean_levels(self, config):
        for pair in PairClass:
            u, i = theoretical_msv(config.line, pair)
            for mode in ("voltage", "current", "both"):
                cfg = dataclasses.replace(config, classify_on=mode)
                assert classify_period(cfg, u, i) is expected_level(pair)


class TestExchangeConfig:
    def test_gamma_below_one_rejected(self):
        with pytest.raises(InvalidParameterError):
            ExchangeConfig(gamma=0.5)

    def test_low_gamma_flagged(self):
        assert "low-gamma" in ExchangeConfig(gamma=5).flags
        assert "low-gamma" not in ExchangeConfig(gamma=100).flags

    def test_bit_period_and_sample_rate(self, config):
        bw = config.line.noise_bandwidth
        assert config.bit_period == 100.0 / bw
        assert config.sample_rate == 10.0 * bw

    def test_thresholds_bracketed_by_extreme_levels(self, config):
        u_ll, _ = theoretical_msv(config.line, PairClass.LL)
        u_hh, _ = theoretical_msv(config.line, PairClass.HH)
        lo, hi = config.voltage_thresholds
        assert u_ll < lo < hi < u_hh

    def test_unbracketed_thresholds_rejected(self, config):
        u_hh, _ = theoretical_msv(config.line, PairClass.HH)
        with pytest.raises(InvalidParameterError):
            ExchangeConfig(voltage_thresholds=(1.0, u_hh * 2))
        with pytest.raises(InvalidParameterError):
            ExchangeConfig(voltage_thresholds=(10.0, 9.0))

    def test_bad_mode_rejected(self):
        with pytest.raises(InvalidParameterError):
            ExchangeConfig(classify_on="psychic")


class TestRunBitPeriod:
    def test_mixed_pair_correctly_classified_yields_matching_bits(self, config):
        rec = run_bit_period(config, (Resistor.L, Resistor.H), 5)
        assert rec.classified is Level.MID and rec.kept
        # Bit convention: the shared bit equals the non-inverting party's state.
        assert rec.alice_bit == Resistor.L.bit == 0
        assert rec.bob_bit == 1 - Resistor.H.bit == 0

    def test_inverting_party_alice(self, config):
        cfg = dataclasses.replace(config, inverting_party=Party.ALICE)
        rec = run_bit_period(cfg, (Resistor.L, Resistor.H), 5)
        assert rec.kept
        assert rec.alice_bit == 1 - Resistor.L.bit == 1
        assert rec.bob_bit == Resistor.H.bit == 1

    def test_ll_period_discarded(self, config):
        # Monte Carlo during development: 1000/1000 seeded LL periods were
        # classified LOW at the default averaging ratio; gate at 99%.
        root = np.random.SeedSequence(77)
        low = kept = 0
        for _ in range(300):
            rec = run_bit_period(config, (Resistor.L, Resistor.L), root.spawn(1)[0])
            low += rec.classified is Level.LOW
            kept += rec.kept
        assert low >= 297
        assert kept == 300 - low

    def test_kept_iff_mid(self, config):
        root = np.random.SeedSequence(13)
        rng = np.random.default_rng(14)
        for _ in range(50):
            rec = run_bit_period(config, choose_resistors(rng), root.spawn(1)[0])
            assert rec.kept == (rec.classified is Level.MID)
            if not rec.kept:
                assert rec.alice_bit is None and rec.bob_bit is None

    def test_mixed_orientations_share_statistics(self, config):
        # LH and HL give the same theoretical levels and indistinguishable
        # empirical means over many periods.
        assert theoretical_msv(config.line, PairClass.LH) == theoretical_msv(
            config.line, PairClass.HL
        )
        root = np.random.SeedSequence(99)
        means = {}
        for name, choices in (("LH", (Resistor.L, Resistor.H)),
                              ("HL", (Resistor.H, Resistor.L))):
            vals = [
                run_bit_period(config, choices, root.spawn(1)[0]).msv_u
                for _ in range(300)
            ]
            means[name] = (np.mean(vals), np.std(vals, ddof=1) / math.sqrt(len(vals)))
        gap = abs(means["LH"][0] - means["HL"][0])
        se = math.hypot(means["LH"][1], means["HL"][1])
        assert gap < 3 * se

    def test_unattacked_period_never_alarms(self, config):
        root = np.random.SeedSequence(55)
        rng = np.random.default_rng(56)
        for _ in range(50):
            rec = run_bit_period(config, choose_resistors(rng), root.spawn(1)[0])
            assert not rec.alarm


class TestRunPeriods:
    def test_stats_add_up(self, config):
        records, stats = run_periods(config, 200, 31)
        assert stats.periods == 200
        assert sum(stats.pair_counts.values()) == 200
        assert stats.kept_bits == sum(r.kept for r in records)
        assert stats.elapsed_s == pytest.approx(200 * config.bit_period, rel=1e-12)

    def test_discard_rule_on_correctly_classified_extremes(self, config):
        records, _ = run_periods(config, 300, 32)
        for rec in records:
            if rec.pair in (PairClass.LL, PairClass.HH) and (
                rec.classified is expected_level(rec.pair)
            ):
                assert not rec.kept


class TestRunKeyExchange:
    def test_zero_target_is_vacuous(self, config):
        alice, bob, stats = run_key_exchange(config, 0, 1)
        assert alice.length == bob.length == 0
        assert stats.periods == 0
        assert alice.hex() == ""

    def test_keys_match_and_have_target_length(self, config):
        alice, bob, stats = run_key_exchange(config, 100, 12345)
        assert alice.length == bob.length == 100
        assert alice == bob
        assert len(alice.hex()) == math.ceil(100 / 8) * 2

    def test_agreement_when_no_kept_misclassification(self, config):
        # Whenever every kept period was truly mixed, inversion makes the
        # two strings identical.
        for seed in range(20):
            alice, bob, stats = run_key_exchange(config, 40, seed)
            if stats.misclassified == 0:
                assert alice == bob

    def test_period_count_near_double_target(self, config):
        # A secure exchange lands on average half the time.
        _, _, stats = run_key_exchange(config, 200, 777)
        assert stats.periods == pytest.approx(400, rel=0.15)

    def test_elapsed_time_matches_worked_numbers(self, config):
        # 2e4 Hz bandwidth and averaging ratio 100 give a 5 ms period; a
        # 100-bit key needs ~200 periods, i.e. about one second.
        _, _, stats = run_key_exchange(config, 100, 2)
        assert config.bit_period == pytest.approx(5e-3, rel=1e-12)
        assert stats.elapsed_s == pytest.approx(1.0, rel=0.15)

    def test_deterministic_under_seed(self, config):
        a1, b1, s1 = run_key_exchange(config, 50, 6)
        a2, b2, s2 = run_key_exchange(config, 50, 6)
        assert np.array_equal(a1.bits, a2.bits)
        assert np.array_equal(b1.bits, b2.bits)
        assert s1.periods == s2.periods

    def test_flags_partition_periods(self, config):
        alice, bob, stats = run_key_exchange(config, 30, 66)
        assert len(alice.flags) == stats.periods
        assert np.count_nonzero(alice.flags == BitFlag.SECURE) == 30
        assert np.array_equal(alice.flags, bob.flags)
        assert np.all(alice.secure_periods[:-1] < alice.secure_periods[1:])

    def test_negative_target_rejected(self, config):
        with pytest.raises(InvalidParameterError):
            run_key_exchange(config, -1, 0)

    def test_timeout_on_starved_thresholds(self, config):
        # A sliver of a MID band keeps essentially nothing; the cap trips.
        u_lh, _ = theoretical_msv(config.line, PairClass.LH)
        starved = dataclasses.replace(
            config,
            classify_on="voltage",
            voltage_thresholds=(u_lh * 0.9990, u_lh * 0.9991),
            timeout_factor=2.0,
        )
        with pytest.raises(ExchangeTimeoutError):
            run_key_exchange(starved, 50, 3)


class TestMonitorEndpoints:
    def test_identical_views_never_alarm(self, config):
        signals = synthesize_period(config, (Resistor.L, Resistor.H), 10)
        assert monitor_endpoints(signals, signals, 0.0) is False

    def test_single_sample_offset_alarms(self, config):
        from kljnsim import LoopSignals

        signals = synthesize_period(config, (Resistor.L, Resistor.H), 10)
        current = signals.channel_current.samples.copy()
        tol = 1e-9
        current[17] += 10 * tol * signals.channel_current.rms()
        tampered = LoopSignals(
            signals.channel_voltage,
            NoiseTrace(current, signals.sample_rate, signals.duration),
        )
        assert monitor_endpoints(signals, tampered, tol) is True

    def test_grid_mismatch_rejected(self, config):
        s1 = synthesize_period(config, (Resistor.L, Resistor.H), 10)
        short = dataclasses.replace(config, gamma=50.0)
        s2 = synthesize_period(short, (Resistor.L, Resistor.H), 10)
        with pytest.raises(GridMismatchError):
            monitor_endpoints(s1, s2, 1e-9)


class TestEstimateBer:
    def test_deterministic(self, config):
        t1 = estimate_ber(config, [10, 100], 100, 5)
        t2 = estimate_ber(config, [10, 100], 100, 5)
        assert t1 == t2

    def test_error_rate_drops_with_averaging(self, config):
        table = estimate_ber(config, [10, 100], 400, 2024)
        by_gamma = {row.gamma: row.ber for row in table}
        assert by_gamma[100.0] < by_gamma[10.0]
        assert by_gamma[100.0] < 0.05

    def test_runs_floor_enforced(self, config):
        with pytest.raises(InvalidParameterError):
            estimate_ber(config, [10], 99, 0)
