"""Tests for protocol module."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from tsqc.adversary import AttackPlan
from tsqc.analytics import overall_intensity_fraction, table1_feasible
from tsqc.errors import ConfigurationError, ParameterError
from tsqc.optics import PhotonPulse, PolarizationState, SplitMode
from tsqc.protocol import (
    AngleSet,
    CheckResult,
    GPolicy,
    GPolicyMode,
    SessionConfig,
    Stage,
    decode_majority,
    encode_bit,
    intensity_check,
    next_g,
    run_three_stage,
)


def test_angle_set_values():
    """Test the angle set holds i*pi/s for a power-of-two s."""
    angles = AngleSet(size=8)
    assert angles.r == 3
    assert angles.angle(0) == 0.0
    assert angles.angle(4) == pytest.approx(math.pi / 2)
    assert angles.angle(9) == pytest.approx(math.pi / 8)
    assert len(angles.states()) == 8


def test_angle_set_rejects_non_power_of_two():
    """Test angle set sizes must be powers of two."""
    with pytest.raises(ValidationError):
        AngleSet(size=6)
    with pytest.raises(ValidationError):
        AngleSet(size=1)


def test_encode_bit_orthogonal_pair():
    """Test bits map to two orthogonal polarizations."""
    assert encode_bit(0) == PolarizationState(0.0)
    assert encode_bit(1) == PolarizationState(math.pi / 2)
    with pytest.raises(ParameterError):
        encode_bit(2)


def test_decode_majority():
    """Test majority decoding, ties and empty input."""
    assert decode_majority(np.array([1, 1, 0])) == 0
    assert decode_majority(np.array([0, 0, 1])) == 1
    assert decode_majority(np.array([0, 1])) is None
    assert decode_majority(np.array([], dtype=np.int64)) is None


def test_intensity_check_is_strict():
    """Test a breach needs observed strictly below expected * (1 - g)."""
    assert intensity_check(100, 80, 0.2) is CheckResult.PASS
    assert intensity_check(100, 79, 0.2) is CheckResult.BREACH
    assert intensity_check(0, 0, 0.2) is CheckResult.PASS


def test_intensity_check_rejects_bad_arguments():
    """Test negative expectations and g outside (0, 1) are rejected."""
    with pytest.raises(ParameterError):
        intensity_check(-1, 0, 0.2)
    with pytest.raises(ParameterError):
        intensity_check(100, 90, 1.0)
    with pytest.raises(ParameterError):
        intensity_check(100, 90, 0.0)


def test_next_g_constant():
    """Test constant mode ignores the indices."""
    policy = GPolicy.constant(0.15)
    assert next_g(policy, 0, 0) == 0.15
    assert next_g(policy, 99, 2) == 0.15


def test_next_g_schedules():
    """Test per-session and within-session schedules index modulo their length."""
    per_session = GPolicy(mode=GPolicyMode.PER_SESSION, g_schedule=(0.1, 0.2, 0.3))
    assert next_g(per_session, 1, 0) == 0.2
    assert next_g(per_session, 4, 2) == 0.2
    within = GPolicy(mode=GPolicyMode.WITHIN_SESSION, g_schedule=(0.1, 0.2))
    assert [next_g(within, 5, k) for k in range(3)] == [0.1, 0.2, 0.1]


def test_next_g_errors():
    """Test negative indices and empty schedules are rejected."""
    with pytest.raises(ParameterError):
        next_g(GPolicy.constant(0.2), -1, 0)
    empty = GPolicy.model_construct(mode=GPolicyMode.PER_SESSION, g_value=0.2, g_schedule=(), rng_seed=None)
    with pytest.raises(ConfigurationError):
        next_g(empty, 0, 0)


def test_g_policy_validation():
    """Test varying modes need a schedule and every g lies in (0, 1)."""
    with pytest.raises(ValueError):
        GPolicy(mode=GPolicyMode.WITHIN_SESSION)
    with pytest.raises(ValidationError):
        GPolicy(mode=GPolicyMode.PER_SESSION, g_schedule=(0.2, 1.0))
    with pytest.raises(ValidationError):
        GPolicy(g_value=1.0)


def test_negotiated_schedule_is_reproducible():
    """Test a negotiated schedule depends only on its seed and stays in range."""
    first = GPolicy.negotiated(GPolicyMode.PER_SESSION, 0.1, 0.3, 5, rng_seed=9)
    second = GPolicy.negotiated(GPolicyMode.PER_SESSION, 0.1, 0.3, 5, rng_seed=9)
    assert first.g_schedule == second.g_schedule
    assert len(first.g_schedule) == 5
    assert all(0.1 <= g <= 0.3 for g in first.g_schedule)
    with pytest.raises(ParameterError):
        GPolicy.negotiated(GPolicyMode.PER_SESSION, 0.3, 0.1, 5, rng_seed=0)


def test_session_config_ranges():
    """Test session configuration range rules."""
    with pytest.raises(ValidationError):
        SessionConfig(alpha=1.0)
    with pytest.raises(ValidationError):
        SessionConfig(pulse_size=0)
    with pytest.raises(ValidationError):
        SessionConfig(bit_to_send=2)
    with pytest.raises(ValidationError):
        SessionConfig(channel_loss=1.0)


@pytest.mark.parametrize('bit', [0, 1])
def test_no_attack_session_decodes_and_passes(bit):
    """Test a clean channel decodes the bit with every check passing."""
    outcome = run_three_stage(SessionConfig(pulse_size=1000, alpha=0.1, bit_to_send=bit, seed=5))
    assert outcome.decoded_bit == bit
    assert outcome.decoded_correctly
    assert not outcome.breach_detected
    assert outcome.breach_stage is None
    assert [r.stage for r in outcome.intensity_records] == list(Stage)
    assert all(r.verdict is CheckResult.PASS for r in outcome.intensity_records)
    assert outcome.final_pulse_composition == (729, 0)
    assert outcome.final_snr == math.inf


def test_checkpoint_records_expected_and_observed():
    """Test the testing portion is compared against alpha * I * (1 - alpha)^k."""
    outcome = run_three_stage(SessionConfig(pulse_size=1000, alpha=0.1, seed=1))
    expected = [r.expected for r in outcome.intensity_records]
    observed = [r.observed for r in outcome.intensity_records]
    assert expected == pytest.approx([100.0, 90.0, 81.0])
    assert observed == [100, 90, 81]


@pytest.mark.parametrize('alpha', [0.05, 0.1, 0.15, 0.3])
def test_clean_channel_never_breaches_for_small_g(alpha):
    """Test an honest deterministic channel passes every check down to g = 0.01."""
    for pulse_size in range(1, 130):
        for g in (0.01, 0.05, 0.2):
            config = SessionConfig(pulse_size=pulse_size, alpha=alpha, g_policy=GPolicy.constant(g), seed=pulse_size)
            outcome = run_three_stage(config)
            assert not outcome.breach_detected, (pulse_size, g)
            records = outcome.intensity_records
            assert [r.observed for r in records] == [r.expected for r in records]


def test_deterministic_expectation_follows_rounded_cascade():
    """Test expectations carry the splitter's rounding: 100 photons at 10% give 10, 9, 8."""
    config = SessionConfig(pulse_size=100, alpha=0.1, g_policy=GPolicy.constant(0.01), seed=0)
    outcome = run_three_stage(config)
    assert [r.expected for r in outcome.intensity_records] == [10.0, 9.0, 8.0]
    assert not outcome.breach_detected


def test_lossy_channel_keeps_real_expectation():
    """Test channel loss compares against alpha * N * (1 - alpha)^k * (1 - loss)^(k + 1)."""
    outcome = run_three_stage(SessionConfig(pulse_size=1000, alpha=0.1, channel_loss=0.1, seed=5))
    expected = [r.expected for r in outcome.intensity_records]
    assert expected == pytest.approx([90.0, 72.9, 59.049])


def test_alpha_zero_checks_trivially_pass():
    """Test alpha = 0 leaves nothing to test and every check passes."""
    outcome = run_three_stage(SessionConfig(pulse_size=200, alpha=0.0, seed=2))
    assert all(r.expected == 0 and r.observed == 0 for r in outcome.intensity_records)
    assert not outcome.breach_detected
    assert outcome.final_pulse_composition == (200, 0)


def test_session_is_reproducible():
    """Test identical configs give identical outcomes."""
    config = SessionConfig(pulse_size=300, seed=42, split_mode=SplitMode.BINOMIAL, channel_loss=0.05)
    assert run_three_stage(config) == run_three_stage(config)


def test_pass_states_follow_rotations():
    """Test the recorded signal polarization on each pass."""
    outcome = run_three_stage(SessionConfig(pulse_size=10, bit_to_send=1, seed=3))
    b, theta, phi = math.pi / 2, outcome.theta, outcome.phi
    assert outcome.pass_states[0] == PolarizationState(b + theta)
    assert outcome.pass_states[1] == PolarizationState(b + theta + phi)
    assert outcome.pass_states[2] == PolarizationState(b + phi)


def test_siphon_without_replacement_is_detected_at_bob_final():
    """Test a 10% siphon on every pass trips the last checkpoint."""
    config = SessionConfig(pulse_size=2000, alpha=0.05, seed=4)
    outcome = run_three_stage(config, AttackPlan.uniform(0.1))
    assert outcome.breach_detected
    assert outcome.breach_stage is Stage.BOB_FINAL
    assert outcome.intensity_records[0].verdict is CheckResult.PASS


def test_large_siphon_is_detected_at_first_checkpoint():
    """Test a siphon beyond g trips Bob's first check."""
    outcome = run_three_stage(SessionConfig(pulse_size=1000, alpha=0.1, seed=4), AttackPlan.uniform(0.3))
    assert outcome.breach_stage is Stage.BOB_FIRST


def test_siphon_and_replace_is_invisible_to_intensity_checks():
    """Test replacement keeps every intensity check passing while adding noise."""
    outcome = run_three_stage(SessionConfig(pulse_size=1000, alpha=0.1, seed=8), AttackPlan.uniform(0.2, replace=True))
    assert not outcome.breach_detected
    good, bad = outcome.final_pulse_composition
    assert bad > 0
    assert good + bad == 729


def test_undecodable_session_reports_diagnostic():
    """Test a pulse emptied by the channel decodes to None with a diagnostic."""
    outcome = run_three_stage(SessionConfig(pulse_size=1, alpha=0.0, seed=0), AttackPlan.uniform(0.9))
    assert outcome.decoded_bit is None
    assert not outcome.decoded_correctly
    assert outcome.diagnostic is not None


class _Recorder:
    """Pass interceptor that only counts what flies past."""

    def __init__(self):
        self.seen = []

    def intercept_pass(self, pulse: PhotonPulse, pass_index: int) -> PhotonPulse:
        self.seen.append((pass_index, pulse.intensity()))
        return pulse


def test_interceptor_sees_every_pass():
    """Test the pass hook runs once per pass with the in-flight pulse."""
    recorder = _Recorder()
    run_three_stage(SessionConfig(pulse_size=1000, alpha=0.1, seed=0), recorder)
    assert recorder.seen == [(1, 1000), (2, 900), (3, 810)]


def test_raising_g_only_removes_breaches():
    """Test a looser threshold never turns a passing checkpoint into a breach."""
    plan = AttackPlan.uniform(0.1)
    breached, observed = [], []
    for g in (0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.5):
        config = SessionConfig(pulse_size=2000, alpha=0.05, g_policy=GPolicy.constant(g), seed=6)
        outcome = run_three_stage(config, plan)
        breached.append({r.stage for r in outcome.intensity_records if r.verdict is CheckResult.BREACH})
        observed.append([r.observed for r in outcome.intensity_records])
    assert all(counts == observed[0] for counts in observed)
    for tighter, looser in zip(breached, breached[1:]):
        assert looser <= tighter
    assert breached[0] == set(Stage)
    assert breached[-1] == set()


def test_budget_table_infeasible_but_checkpoints_hold():
    """Test a siphon outside the overall intensity budget that every checkpoint still accepts.

    At alpha = 0.07 and beta = 0.01 the overall fraction drops below 1 - g, yet each
    checkpoint only loses (1 - beta)^k of its expectation, which stays above 1 - g.
    """
    alpha, beta, g = 0.07, 0.01, 0.2
    assert overall_intensity_fraction(alpha, beta) < 1 - g
    assert not table1_feasible(alpha, beta, g)
    assert (1 - beta) ** 3 >= 1 - g

    config = SessionConfig(pulse_size=2000, alpha=alpha, g_policy=GPolicy.constant(g), seed=9)
    outcome = run_three_stage(config, AttackPlan.uniform(beta))
    assert not outcome.breach_detected
    assert [r.observed for r in outcome.intensity_records] == [139, 128, 117]
    assert [r.expected for r in outcome.intensity_records] == [140.0, 130.0, 121.0]
