"""Seeded experiment harness: batch sessions, sweeps, the worked siphoning example and SNR curves."""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from tsqc.adversary import AttackPlan, Eavesdropper, PhotonVector, constant_yield_schedule, intercept
from tsqc.analytics import snr_uniform
from tsqc.errors import ParameterError
from tsqc.metrics import SimulationMetrics
from tsqc.optics import PhotonPulse, PolarizationState
from tsqc.protocol import AngleSet, GPolicy, SessionConfig, run_three_stage

logger = logging.getLogger(__name__)

SWEEPABLE = ('alpha', 'beta', 'channel_loss', 'pulse_size', 'g', 'angle_set_size', 'p_min')
INTEGER_PARAMETERS = ('pulse_size', 'angle_set_size', 'p_min')
ATTACK_PARAMETERS = ('beta', 'p_min')
Z_95 = 1.96


def _revalidate(model: BaseModel, **update: Any) -> Any:
    """Copy a frozen model with updated fields, running its validators again."""
    return type(model).model_validate({**model.model_dump(), **update})


class Sweep(BaseModel):
    """One parameter varied over a list of values."""

    model_config = ConfigDict(frozen=True)

    parameter: str = Field(..., description=f"One of {', '.join(SWEEPABLE)}")
    values: Tuple[float, ...] = Field(..., min_length=1)

    @field_validator('parameter')
    @classmethod
    def validate_parameter(cls, v: str) -> str:
        """Validate the parameter can be swept."""
        if v not in SWEEPABLE:
            raise ValueError(f"sweep parameter must be one of {list(SWEEPABLE)}, got '{v}'")
        return v

    @model_validator(mode='after')
    def validate_integral(self) -> 'Sweep':
        """Counts must be swept over whole numbers."""
        if self.parameter in INTEGER_PARAMETERS:
            for value in self.values:
                if not float(value).is_integer():
                    raise ValueError(f"{self.parameter} values must be integers, got {value}")
        return self


class ExperimentSpec(BaseModel):
    """A batch of seeded sessions, optionally swept over one parameter."""

    model_config = ConfigDict(frozen=True)

    base_config: SessionConfig = Field(default_factory=SessionConfig)
    attack: Optional[AttackPlan] = Field(default=None)
    trials: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)
    sweep: Optional[Sweep] = Field(default=None)
    workers: int = Field(default=1, ge=1, description="Worker threads; results do not depend on it")
    randomize_bit: bool = Field(default=False, description="Draw the sent bit per trial")

    @model_validator(mode='after')
    def validate_sweep(self) -> 'ExperimentSpec':
        """Every sweep value must produce a valid cell."""
        if self.sweep is None:
            return self
        if self.sweep.parameter in ATTACK_PARAMETERS and self.attack is None:
            raise ValueError(f"sweeping {self.sweep.parameter} needs an attack plan")
        for value in self.sweep.values:
            self.cell_inputs(value)
        return self

    def cell_values(self) -> List[Optional[float]]:
        return list(self.sweep.values) if self.sweep else [None]

    def cell_inputs(self, value: Optional[float]) -> Tuple[SessionConfig, Optional[AttackPlan]]:
        """Session config and attack plan for one sweep cell."""
        config, attack = self.base_config, self.attack
        if value is None or self.sweep is None:
            return config, attack

        parameter = self.sweep.parameter
        if parameter in INTEGER_PARAMETERS:
            value = int(value)
        if parameter in ('alpha', 'channel_loss', 'pulse_size'):
            config = _revalidate(config, **{parameter: value})
        elif parameter == 'g':
            config = _revalidate(config, g_policy=GPolicy.constant(value))
        elif parameter == 'angle_set_size':
            angle_set = AngleSet(size=value)
            config = _revalidate(config, angle_set=angle_set)
            if attack is not None:
                attack = _revalidate(attack, tomography=_revalidate(attack.tomography, angle_set=angle_set))
        elif parameter == 'beta':
            attack = _revalidate(attack, siphon_fractions=(value, value, value))
        elif parameter == 'p_min':
            attack = _revalidate(attack, tomography=_revalidate(attack.tomography, p_min=value))
        return config, attack


@dataclass(frozen=True)
class TrialRecord:
    """What one session contributes to the aggregates."""

    breach_detected: bool
    decoded_correctly: bool
    final_good: int
    final_bad: int
    eve_success: bool


@dataclass(frozen=True)
class CellResult:
    """Aggregates over the trials of one sweep cell.

    Half-widths are 95% normal-approximation intervals and are None for a single trial.
    """

    index: int
    parameter: Optional[str]
    value: Optional[float]
    trials: int
    detection_rate: float
    detection_ci: Optional[float]
    decode_accuracy: float
    decode_ci: Optional[float]
    mean_final_snr: Optional[float]
    snr_excluded: int
    eve_success_rate: float
    eve_success_ci: Optional[float]

    @property
    def label(self) -> str:
        if self.parameter is None:
            return "base"
        return f"{self.parameter}={self.value:.6g}"


@dataclass(frozen=True)
class ExperimentResult:
    """Per-cell aggregates of an experiment, in sweep order."""

    spec: ExperimentSpec
    cells: Tuple[CellResult, ...]


def trial_seed(seed: int, cell: int, trial: int, stream: int = 0) -> int:
    """Counter-based child seed for one trial, independent of execution order."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(cell, trial, stream))
    return int(sequence.generate_state(1)[0])


def half_width(rate: float, n: int) -> Optional[float]:
    """95% normal-approximation half-width of a proportion; None when n < 2."""
    if n < 2:
        return None
    return Z_95 * math.sqrt(rate * (1.0 - rate) / n)


def _run_trial(
    config: SessionConfig,
    attack: Optional[AttackPlan],
    metrics: Optional[SimulationMetrics],
) -> TrialRecord:
    start = time.perf_counter()
    eve = Eavesdropper(attack, session_seed=config.seed) if attack is not None else None
    outcome = run_three_stage(config, eve)
    eve_success = eve.broke_session(outcome.pass_states) if eve is not None else False
    if metrics is not None:
        metrics.record_session(
            outcome,
            time.perf_counter() - start,
            attacked=eve is not None,
            siphoned=eve.siphoned_photons() if eve is not None else 0,
        )
    good, bad = outcome.final_pulse_composition
    return TrialRecord(
        breach_detected=outcome.breach_detected,
        decoded_correctly=outcome.decoded_correctly,
        final_good=good,
        final_bad=bad,
        eve_success=eve_success,
    )


def aggregate(
    records: Sequence[TrialRecord],
    index: int = 0,
    parameter: Optional[str] = None,
    value: Optional[float] = None,
) -> CellResult:
    """Reduce trial records to cell aggregates with sums that ignore record order."""
    n = len(records)
    detections = sum(r.breach_detected for r in records)
    decoded = sum(r.decoded_correctly for r in records)
    broken = sum(r.eve_success for r in records)
    ratios = [r.final_good / r.final_bad for r in records if r.final_bad > 0]

    detection_rate = detections / n
    decode_accuracy = decoded / n
    eve_success_rate = broken / n
    return CellResult(
        index=index,
        parameter=parameter,
        value=value,
        trials=n,
        detection_rate=detection_rate,
        detection_ci=half_width(detection_rate, n),
        decode_accuracy=decode_accuracy,
        decode_ci=half_width(decode_accuracy, n),
        mean_final_snr=math.fsum(ratios) / len(ratios) if ratios else None,
        snr_excluded=n - len(ratios),
        eve_success_rate=eve_success_rate,
        eve_success_ci=half_width(eve_success_rate, n),
    )


def run_experiment(spec: ExperimentSpec, metrics: Optional[SimulationMetrics] = None) -> ExperimentResult:
    """Run ``spec.trials`` seeded sessions per sweep cell and aggregate them.

    Args:
        spec: Experiment specification
        metrics: Optional collector updated after every session

    Returns:
        One CellResult per sweep value (a single "base" cell without a sweep)
    """
    parameter = spec.sweep.parameter if spec.sweep else None
    cells = []
    for index, value in enumerate(spec.cell_values()):
        config, attack = spec.cell_inputs(value)
        tasks = []
        for trial in range(spec.trials):
            seed = trial_seed(spec.seed, index, trial)
            update: Dict[str, Any] = {'seed': seed, 'session_index': trial}
            if spec.randomize_bit:
                update['bit_to_send'] = trial_seed(spec.seed, index, trial, stream=1) & 1
            tasks.append(config.model_copy(update=update))

        def run(trial_config: SessionConfig) -> TrialRecord:
            return _run_trial(trial_config, attack, metrics)

        if spec.workers > 1:
            with ThreadPoolExecutor(max_workers=spec.workers) as pool:
                records = list(pool.map(run, tasks))
        else:
            records = [run(task) for task in tasks]

        cell = aggregate(records, index=index, parameter=parameter, value=value)
        logger.info(
            f"Cell {cell.label}: {cell.trials} trials, detection={cell.detection_rate:.4f}, "
            f"decode={cell.decode_accuracy:.4f}, eve={cell.eve_success_rate:.4f}"
        )
        cells.append(cell)
    return ExperimentResult(spec=spec, cells=tuple(cells))


@dataclass(frozen=True)
class PassTrace:
    """One pass of the worked siphoning example.

    Attributes:
        pass_index: 1, 2 or 3
        photons_taken: Photons Eve siphons on this pass
        planned_stash: Eve's planning view: exactly the needed yield, the rest noise
        stash: Mean stash composition over all trials
        stream: Mean composition of the forwarded stream after replacement
    """

    pass_index: int
    photons_taken: int
    planned_stash: PhotonVector
    stash: PhotonVector
    stream: PhotonVector

    @property
    def planned_snr(self) -> float:
        return self.planned_stash.snr

    @property
    def empirical_snr(self) -> float:
        return self.stash.snr


@dataclass(frozen=True)
class WorkedExampleTrace:
    """Pass-by-pass photon vectors of the scripted constant-yield attack."""

    pulse_size: int
    good_needed: int
    trials: int
    seed: int
    passes: Tuple[PassTrace, ...]


def reproduce_worked_example(
    seed: int = 0,
    trials: int = 10_000,
    pulse_size: int = 100,
    good_needed: int = 20,
) -> WorkedExampleTrace:
    """Replay the scripted siphon-and-replace attack on a lone burst.

    Eve plans to extract ``good_needed`` signal photons per pass (20, 25 then 34 photons
    for the default burst of 100) and replaces everything she takes with random noise.

    Args:
        seed: Master seed; trial t uses a child seed keyed on t
        trials: Number of bursts averaged
        pulse_size: Photons in Alice's burst
        good_needed: Signal photons Eve plans to extract per pass

    Returns:
        Planned and mean empirical stash and stream per pass
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    schedule = constant_yield_schedule(pulse_size, good_needed)
    plan = AttackPlan(siphon_fractions=tuple(taken / pulse_size for taken in schedule), replace=True)

    sums = np.zeros((3, 4), dtype=np.int64)  # per pass: stash good, stash bad, stream good, stream bad
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))
        pulse = PhotonPulse.uniform(pulse_size, PolarizationState(0.0))
        for row, pass_index in enumerate((1, 2, 3)):
            pulse, stash = intercept(pulse, pass_index, plan, rng)
            sums[row] += (stash.good_count(), stash.bad_count(), pulse.good_count(), pulse.bad_count())

    means = sums / trials
    passes = tuple(
        PassTrace(
            pass_index=row + 1,
            photons_taken=taken,
            planned_stash=PhotonVector(good=good_needed, bad=taken - good_needed),
            stash=PhotonVector(good=means[row, 0], bad=means[row, 1]),
            stream=PhotonVector(good=means[row, 2], bad=means[row, 3]),
        )
        for row, taken in enumerate(schedule)
    )
    logger.info(f"Worked example over {trials} trials: stash SNRs {[round(p.empirical_snr, 3) for p in passes]}")
    return WorkedExampleTrace(
        pulse_size=pulse_size, good_needed=good_needed, trials=trials, seed=seed, passes=passes
    )


def snr_curve(alpha_min: float, alpha_max: float, steps: int) -> List[Tuple[float, float]]:
    """Uniform-siphon SNR at ``steps`` evenly spaced fractions, both endpoints included."""
    if not 0.0 <= alpha_min < alpha_max < 1.0:
        raise ParameterError(f"need 0 <= alpha_min < alpha_max < 1, got [{alpha_min}, {alpha_max}]")
    if steps < 2:
        raise ParameterError(f"steps must be >= 2, got {steps}")
    return [(float(alpha), snr_uniform(float(alpha))) for alpha in np.linspace(alpha_min, alpha_max, steps)]
