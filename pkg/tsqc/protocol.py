"""Three-stage protocol state machine with intensity-aware checkpoints."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, List, Optional, Protocol, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from tsqc.errors import ConfigurationError, ParameterError
from tsqc.optics import (
    PhotonPulse,
    PolarizationState,
    RotationOp,
    SplitMode,
    deterministic_count,
    measure_pulse,
    rotate,
    split_fraction,
)

if TYPE_CHECKING:
    from tsqc.adversary import AttackPlan

logger = logging.getLogger(__name__)

BIT_BASIS = PolarizationState(0.0)


class AngleSet(BaseModel):
    """The s = 2^r rotation angles {i*pi/s} Alice and Bob draw their secrets from."""

    model_config = ConfigDict(frozen=True)

    size: int = Field(default=16, ge=2, description="Number of allowed rotation angles (power of two)")

    @field_validator('size')
    @classmethod
    def validate_power_of_two(cls, v: int) -> int:
        """Validate size is a power of two."""
        if v & (v - 1):
            raise ValueError(f"angle set size must be a power of two, got {v}")
        return v

    @property
    def r(self) -> int:
        """Bit width of an angle index."""
        return self.size.bit_length() - 1

    def angle(self, index: int) -> float:
        return (index % self.size) * math.pi / self.size

    def states(self) -> List[PolarizationState]:
        return [PolarizationState(self.angle(i)) for i in range(self.size)]

    def random_angle(self, rng: np.random.Generator) -> float:
        return self.angle(int(rng.integers(self.size)))


class GPolicyMode(str, Enum):
    """How the detection threshold g evolves."""

    CONSTANT = "constant"
    PER_SESSION = "per_session"
    WITHIN_SESSION = "within_session"


class GPolicy(BaseModel):
    """Detection threshold policy shared by Alice and Bob."""

    model_config = ConfigDict(frozen=True)

    mode: GPolicyMode = Field(default=GPolicyMode.CONSTANT)
    g_value: float = Field(default=0.2, gt=0, lt=1, description="Threshold in constant mode")
    g_schedule: Tuple[float, ...] = Field(default=(), description="Pre-shared thresholds in varying modes")
    rng_seed: Optional[int] = Field(default=None, description="Seed the schedule was negotiated from")

    @field_validator('g_schedule')
    @classmethod
    def validate_schedule(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        """Validate every scheduled g lies in (0, 1)."""
        for g in v:
            if not 0.0 < g < 1.0:
                raise ValueError(f"every g must be in (0, 1), got {g}")
        return v

    @model_validator(mode='after')
    def validate_mode(self) -> 'GPolicy':
        """Varying modes need a schedule."""
        if self.mode is not GPolicyMode.CONSTANT and not self.g_schedule:
            raise ConfigurationError(f"g policy mode '{self.mode.value}' requires a non-empty g_schedule")
        return self

    @classmethod
    def constant(cls, g: float) -> 'GPolicy':
        return cls(mode=GPolicyMode.CONSTANT, g_value=g)

    @classmethod
    def negotiated(cls, mode: GPolicyMode, low: float, high: float, length: int, rng_seed: int) -> 'GPolicy':
        """Draw a pre-shared schedule of ``length`` thresholds uniformly from [low, high]."""
        if not 0.0 < low <= high < 1.0:
            raise ParameterError(f"negotiated g range must satisfy 0 < low <= high < 1, got [{low}, {high}]")
        if length < 1:
            raise ParameterError(f"schedule length must be >= 1, got {length}")
        rng = np.random.default_rng(rng_seed)
        schedule = tuple(float(g) for g in rng.uniform(low, high, size=length))
        return cls(mode=mode, g_schedule=schedule, rng_seed=rng_seed)


def next_g(policy: GPolicy, session_index: int, stage_index: int) -> float:
    """Threshold in force for a given session and checkpoint.

    Raises:
        ParameterError: On negative indices
        ConfigurationError: If a varying mode has no schedule
    """
    if session_index < 0 or stage_index < 0:
        raise ParameterError(f"indices must be >= 0, got session={session_index}, stage={stage_index}")
    if policy.mode is GPolicyMode.CONSTANT:
        return policy.g_value
    if not policy.g_schedule:
        raise ConfigurationError(f"g policy mode '{policy.mode.value}' has an empty schedule")
    index = session_index if policy.mode is GPolicyMode.PER_SESSION else stage_index
    return policy.g_schedule[index % len(policy.g_schedule)]


class SessionConfig(BaseModel):
    """All parameters of one protocol run."""

    model_config = ConfigDict(frozen=True)

    angle_set: AngleSet = Field(default_factory=AngleSet)
    pulse_size: int = Field(default=1000, ge=1, description="Photons N in Alice's burst (public intensity I)")
    alpha: float = Field(default=0.1, ge=0, lt=1, description="Fraction diverted at each intensity checkpoint")
    g_policy: GPolicy = Field(default_factory=GPolicy)
    bit_to_send: int = Field(default=0, ge=0, le=1)
    channel_loss: float = Field(default=0.0, ge=0, lt=1, description="Per-pass photon loss probability")
    split_mode: SplitMode = Field(default=SplitMode.DETERMINISTIC)
    seed: int = Field(default=0, ge=0)
    session_index: int = Field(default=0, ge=0)


class CheckResult(str, Enum):
    """Verdict of an intensity checkpoint."""

    PASS = "pass"
    BREACH = "breach"


class Stage(str, Enum):
    """Intensity checkpoints, in protocol order."""

    BOB_FIRST = "bob_first"
    ALICE_RETURN = "alice_return"
    BOB_FINAL = "bob_final"

    @property
    def index(self) -> int:
        return list(Stage).index(self)


def intensity_check(expected: float, observed: int, g: float) -> CheckResult:
    """Breach iff ``observed`` falls strictly below ``expected * (1 - g)``."""
    if expected < 0:
        raise ParameterError(f"expected intensity must be >= 0, got {expected}")
    if not 0.0 < g < 1.0:
        raise ParameterError(f"g must be in (0, 1), got {g}")
    return CheckResult.BREACH if observed < expected * (1.0 - g) else CheckResult.PASS


@dataclass(frozen=True)
class IntensityRecord:
    """One checkpoint measurement."""

    stage: Stage
    expected: float
    observed: int
    g: float
    verdict: CheckResult


@dataclass(frozen=True)
class SessionOutcome:
    """Observable result of one protocol run (plus the secrets, for analysis)."""

    bit_sent: int
    decoded_bit: Optional[int]
    intensity_records: Tuple[IntensityRecord, ...]
    breach_detected: bool
    breach_stage: Optional[Stage]
    final_pulse_composition: Tuple[int, int]
    theta: float
    phi: float
    pass_states: Tuple[PolarizationState, PolarizationState, PolarizationState]
    diagnostic: Optional[str] = None

    @property
    def decoded_correctly(self) -> bool:
        return self.decoded_bit == self.bit_sent

    @property
    def final_snr(self) -> float:
        good, bad = self.final_pulse_composition
        return math.inf if bad == 0 else good / bad


class PassInterceptor(Protocol):
    """Hook invoked on the pulse in flight after channel loss on every pass."""

    def intercept_pass(self, pulse: PhotonPulse, pass_index: int) -> PhotonPulse:
        ...


def encode_bit(bit: int, angle_set: Optional[AngleSet] = None) -> PolarizationState:
    """Bit 0 -> angle 0, bit 1 -> angle pi/2 (an orthogonal, maximally distinguishable pair)."""
    if bit not in (0, 1):
        raise ParameterError(f"bit must be 0 or 1, got {bit}")
    return PolarizationState(0.0 if bit == 0 else math.pi / 2)


def decode_majority(outcomes: np.ndarray) -> Optional[int]:
    """Majority vote over measurements in the bit basis; ties and empty input decode to None."""
    aligned = int(np.count_nonzero(outcomes))
    orthogonal = int(outcomes.size) - aligned
    if aligned > orthogonal:
        return 0
    if orthogonal > aligned:
        return 1
    return None


class _Session:
    """Mutable bookkeeping for one run; never escapes run_three_stage."""

    def __init__(self, config: SessionConfig, attack: Optional[PassInterceptor]):
        self.config = config
        self.attack = attack
        protocol_seq, channel_seq = np.random.SeedSequence(config.seed).spawn(2)
        self.rng = np.random.default_rng(protocol_seq)
        self.channel_rng = np.random.default_rng(channel_seq)
        self.records: List[IntensityRecord] = []

    def transmit(self, pulse: PhotonPulse, pass_index: int) -> PhotonPulse:
        if self.config.channel_loss > 0:
            _, pulse = split_fraction(pulse, self.config.channel_loss, SplitMode.BINOMIAL, self.channel_rng)
        if self.attack is not None:
            pulse = self.attack.intercept_pass(pulse, pass_index)
        return pulse

    def expected_testing(self, k: int) -> float:
        """Testing-portion intensity an honest channel delivers at checkpoint ``k``.

        A lossless deterministic splitter is replayed on the public counts, so the
        expectation carries the same rounding as the observation.
        """
        cfg = self.config
        if SplitMode(cfg.split_mode) is SplitMode.DETERMINISTIC and cfg.channel_loss == 0:
            incoming = cfg.pulse_size
            for _ in range(k):
                incoming -= deterministic_count(cfg.alpha, incoming)
            return float(deterministic_count(cfg.alpha, incoming))
        return cfg.alpha * cfg.pulse_size * (1.0 - cfg.alpha) ** k * (1.0 - cfg.channel_loss) ** (k + 1)

    def checkpoint(self, pulse: PhotonPulse, stage: Stage) -> PhotonPulse:
        cfg = self.config
        k = stage.index
        testing, remainder = split_fraction(pulse, cfg.alpha, cfg.split_mode, self.rng)
        expected = self.expected_testing(k)
        g = next_g(cfg.g_policy, cfg.session_index, k)
        observed = testing.intensity()
        verdict = intensity_check(expected, observed, g)
        self.records.append(IntensityRecord(stage=stage, expected=expected, observed=observed, g=g, verdict=verdict))
        logger.debug(f"{stage.value}: expected={expected:.3f} observed={observed} g={g} -> {verdict.value}")
        return remainder


def run_three_stage(
    config: SessionConfig,
    attack: Optional[Union[PassInterceptor, "AttackPlan"]] = None,
) -> SessionOutcome:
    """Run Alice -> Bob -> Alice -> Bob with intensity checks at Bob, Alice and Bob.

    Args:
        config: Session parameters; the run is a pure function of config (and attack)
        attack: A pass interceptor, or an attack plan that is wrapped in an eavesdropper
            seeded from the plan and the session seed

    Returns:
        Session outcome with every intensity record
    """
    from tsqc import adversary

    if isinstance(attack, adversary.AttackPlan):
        attack = adversary.Eavesdropper(attack, session_seed=config.seed)

    session = _Session(config, attack)
    rng = session.rng
    theta = config.angle_set.random_angle(rng)
    phi = config.angle_set.random_angle(rng)
    encoded = encode_bit(config.bit_to_send, config.angle_set)
    pass_states = (
        PolarizationState(encoded.angle + theta),
        PolarizationState(encoded.angle + theta + phi),
        PolarizationState(encoded.angle + phi),
    )

    # Stage 1: Alice rotates by theta and sends
    pulse = rotate(PhotonPulse.uniform(config.pulse_size, encoded), RotationOp(theta))
    pulse = session.transmit(pulse, 1)

    # Stage 2: Bob checks, rotates by phi and returns
    pulse = session.checkpoint(pulse, Stage.BOB_FIRST)
    pulse = session.transmit(rotate(pulse, RotationOp(phi)), 2)

    # Stage 3: Alice checks, undoes theta and resends
    pulse = session.checkpoint(pulse, Stage.ALICE_RETURN)
    pulse = session.transmit(rotate(pulse, RotationOp(-theta)), 3)

    # Stage 4: Bob checks, undoes phi and decodes
    pulse = session.checkpoint(pulse, Stage.BOB_FINAL)
    pulse = rotate(pulse, RotationOp(-phi))
    outcomes = measure_pulse(pulse, BIT_BASIS, rng)
    decoded = decode_majority(outcomes)

    diagnostic = None
    if pulse.intensity() == 0:
        diagnostic = "final pulse is empty: every photon was lost, diverted or siphoned"
        logger.warning(f"Session seed={config.seed}: {diagnostic}")
    elif decoded is None:
        diagnostic = f"majority vote tied over {pulse.intensity()} photons"
        logger.warning(f"Session seed={config.seed}: {diagnostic}")

    breaches = [r for r in session.records if r.verdict is CheckResult.BREACH]
    return SessionOutcome(
        bit_sent=config.bit_to_send,
        decoded_bit=decoded,
        intensity_records=tuple(session.records),
        breach_detected=bool(breaches),
        breach_stage=breaches[0].stage if breaches else None,
        final_pulse_composition=(pulse.good_count(), pulse.bad_count()),
        theta=theta,
        phi=phi,
        pass_states=pass_states,
        diagnostic=diagnostic,
    )

