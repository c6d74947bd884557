"""Simulator settings: flat CLI/env/config-file values turned into validated domain models."""

from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from tsqc.adversary import AttackPlan, TomographyKind, TomographyModel
from tsqc.montecarlo import ExperimentSpec, Sweep
from tsqc.optics import SplitMode
from tsqc.protocol import AngleSet, GPolicy, GPolicyMode, SessionConfig

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')
LOG_FORMATS = ('standard', 'json')


class LoggingConfig(BaseModel):
    """Where and how a run logs."""

    level: str = Field(default='WARNING', description="One of DEBUG, INFO, WARNING, ERROR, CRITICAL")
    format: str = Field(default='standard', description="standard or json")
    file: Optional[Path] = Field(default=None, description="Rotating log file")
    console: bool = Field(default=False, description="Log to stderr")
    max_bytes: int = Field(default=10 * 1024 * 1024, ge=1024, description="Rotation size")
    backup_count: int = Field(default=5, ge=0, description="Rotated files kept")

    @field_validator('level')
    @classmethod
    def validate_level(cls, v: str) -> str:
        """Normalise the level name to upper case."""
        level = v.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"log level '{v}' is not one of {', '.join(LOG_LEVELS)}")
        return level

    @field_validator('format')
    @classmethod
    def validate_format(cls, v: str) -> str:
        if v not in LOG_FORMATS:
            raise ValueError(f"log format '{v}' is not one of {', '.join(LOG_FORMATS)}")
        return v


class SimulatorConfig(BaseSettings):
    """Flat simulator settings, one field per command-line flag.

    Range rules live on the domain models; the ``get_*`` factories build and
    validate them, so a bad value surfaces as a ValueError there.
    """

    model_config = SettingsConfigDict(
        env_prefix='TSQC_',
        case_sensitive=False,
        extra='ignore',
    )

    seed: int = Field(default=0, description="Master seed")

    # Session
    pulse_size: int = Field(default=1000, description="Photons in Alice's burst")
    alpha: float = Field(default=0.1, description="Checkpoint diversion fraction")
    bit: int = Field(default=0, description="Bit Alice sends")
    channel_loss: float = Field(default=0.0, description="Per-pass loss probability")
    split_mode: SplitMode = Field(default=SplitMode.DETERMINISTIC, description="Beam splitter model")
    angle_set_size: int = Field(default=16, description="Number of rotation angles (power of two)")
    session_index: int = Field(default=0, description="Session number within a series")

    # Detection threshold
    g: float = Field(default=0.2, description="Threshold in constant mode")
    g_mode: GPolicyMode = Field(default=GPolicyMode.CONSTANT, description="g policy")
    g_schedule: List[float] = Field(default=[], description="Pre-shared g schedule")
    g_range: Optional[List[float]] = Field(default=None, description="Negotiate a schedule from [low, high]")
    g_schedule_length: int = Field(default=8, description="Length of a negotiated schedule")

    # Attack
    siphon: Optional[float] = Field(default=None, description="Uniform siphon fraction")
    siphon_fractions: Optional[List[float]] = Field(default=None, description="Per-pass siphon fractions")
    replace: bool = Field(default=False, description="Siphon-and-replace")
    tomography: TomographyKind = Field(default=TomographyKind.ABSTRACT_THRESHOLD, description="Eve's estimator")
    p_min: int = Field(default=20, description="Good photons for certain identification")
    attack_seed: int = Field(default=0, description="Eavesdropper seed")

    # Experiment
    trials: int = Field(default=100, description="Sessions per cell")
    sweep_parameter: Optional[str] = Field(default=None, description="Swept parameter")
    sweep_values: List[float] = Field(default=[], description="Sweep values")
    workers: int = Field(default=1, description="Worker threads")
    randomize_bit: bool = Field(default=False, description="Random bit per trial")

    # Logging
    log_level: str = Field(default="WARNING", description="Root log level")
    log_format: str = Field(default="standard", description="standard or json")
    log_file: Optional[Path] = Field(default=None, description="Rotating log file")
    log_to_console: bool = Field(default=False, description="Log to stderr")

    metrics_file: Optional[Path] = Field(default=None, description="Prometheus textfile output")

    def get_g_policy(self) -> GPolicy:
        """Get detection threshold policy."""
        if self.g_mode is GPolicyMode.CONSTANT:
            return GPolicy.constant(self.g)
        if not self.g_schedule and self.g_range:
            if len(self.g_range) != 2:
                raise ValueError(f"g_range needs exactly two values, got {self.g_range}")
            low, high = self.g_range
            return GPolicy.negotiated(self.g_mode, low, high, self.g_schedule_length, rng_seed=self.seed)
        return GPolicy(mode=self.g_mode, g_schedule=tuple(self.g_schedule))

    def get_session_config(self) -> SessionConfig:
        """Get session configuration."""
        return SessionConfig(
            angle_set=AngleSet(size=self.angle_set_size),
            pulse_size=self.pulse_size,
            alpha=self.alpha,
            g_policy=self.get_g_policy(),
            bit_to_send=self.bit,
            channel_loss=self.channel_loss,
            split_mode=self.split_mode,
            seed=self.seed,
            session_index=self.session_index,
        )

    def get_attack_plan(self) -> Optional[AttackPlan]:
        """Get attack plan, or None when no siphoning is configured."""
        if self.siphon_fractions is not None:
            if len(self.siphon_fractions) != 3:
                raise ValueError(f"siphon_fractions needs one value per pass, got {self.siphon_fractions}")
            fractions = tuple(self.siphon_fractions)
        elif self.siphon is not None:
            fractions = (self.siphon, self.siphon, self.siphon)
        else:
            return None
        return AttackPlan(
            siphon_fractions=fractions,
            replace=self.replace,
            tomography=TomographyModel(
                kind=self.tomography,
                p_min=self.p_min,
                angle_set=AngleSet(size=self.angle_set_size),
            ),
            seed=self.attack_seed,
        )

    def get_experiment_spec(self) -> ExperimentSpec:
        """Get experiment specification."""
        sweep = None
        if self.sweep_parameter:
            sweep = Sweep(parameter=self.sweep_parameter, values=tuple(self.sweep_values))
        return ExperimentSpec(
            base_config=self.get_session_config(),
            attack=self.get_attack_plan(),
            trials=self.trials,
            seed=self.seed,
            sweep=sweep,
            workers=self.workers,
            randomize_bit=self.randomize_bit,
        )

    def get_logging_config(self) -> LoggingConfig:
        """Get logging configuration (file rotation uses the defaults)."""
        return LoggingConfig(
            level=self.log_level,
            format=self.log_format,
            file=self.log_file,
            console=self.log_to_console,
        )
