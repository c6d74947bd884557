"""Eavesdropper strategies: siphoning, replacement injection and tomography."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import xlogy

from tsqc.errors import ParameterError
from tsqc.optics import (
    PhotonPulse,
    PolarizationState,
    SplitMode,
    malus_probability,
    split_fraction,
)
from tsqc.protocol import AngleSet

logger = logging.getLogger(__name__)

PASSES = (1, 2, 3)


class TomographyKind(str, Enum):
    """How Eve turns a stash into an angle estimate."""

    ABSTRACT_THRESHOLD = "abstract_threshold"
    PHYSICAL_ML = "physical_ml"


class TomographyModel(BaseModel):
    """Eve's state-estimation resource model."""

    model_config = ConfigDict(frozen=True)

    kind: TomographyKind = Field(default=TomographyKind.ABSTRACT_THRESHOLD)
    p_min: int = Field(default=20, ge=1, description="Good photons needed for certain identification")
    angle_set: AngleSet = Field(default_factory=AngleSet, description="Candidate angles")


class AttackPlan(BaseModel):
    """Eve's per-pass siphoning strategy."""

    model_config = ConfigDict(frozen=True)

    siphon_fractions: Tuple[float, float, float] = Field(default=(0.0, 0.0, 0.0))
    replace: bool = Field(default=False, description="Inject one random photon per siphoned photon")
    tomography: TomographyModel = Field(default_factory=TomographyModel)
    seed: int = Field(default=0, ge=0)

    @field_validator('siphon_fractions')
    @classmethod
    def validate_fractions(cls, v: Tuple[float, float, float]) -> Tuple[float, float, float]:
        """Validate every fraction lies in [0, 1)."""
        for fraction in v:
            if not 0.0 <= fraction < 1.0:
                raise ValueError(f"siphon fractions must be in [0, 1), got {fraction}")
        return v

    @classmethod
    def uniform(cls, fraction: float, **kwargs) -> 'AttackPlan':
        """Siphon the same fraction on every pass."""
        return cls(siphon_fractions=(fraction, fraction, fraction), **kwargs)

    def fraction(self, pass_index: int) -> float:
        if pass_index not in PASSES:
            raise ParameterError(f"pass index must be 1, 2 or 3, got {pass_index}")
        return self.siphon_fractions[pass_index - 1]


@dataclass(frozen=True)
class PhotonVector:
    """Expected {good, bad} photon counts."""

    good: float
    bad: float

    def __post_init__(self) -> None:
        if self.good < 0 or self.bad < 0:
            raise ParameterError(f"photon counts must be >= 0, got {{{self.good}, {self.bad}}}")

    @property
    def snr(self) -> float:
        return math.inf if self.bad == 0 else self.good / self.bad

    @property
    def total(self) -> float:
        return self.good + self.bad


@dataclass(frozen=True)
class TomographyResult:
    """Eve's guess for one pass."""

    estimate: PolarizationState
    success: bool
    photons_used: int


def intercept(
    pulse: PhotonPulse,
    pass_index: int,
    plan: AttackPlan,
    rng: np.random.Generator,
) -> Tuple[PhotonPulse, PhotonPulse]:
    """Siphon a fraction of the pulse and optionally top it up with random photons.

    Returns:
        (forwarded, stash)
    """
    fraction = plan.fraction(pass_index)
    stash, forwarded = split_fraction(pulse, fraction, SplitMode.DETERMINISTIC, rng)
    if plan.replace and stash.intensity():
        noise = PhotonPulse(
            angles=rng.uniform(0.0, math.pi, size=stash.intensity()),
            injected=np.ones(stash.intensity(), dtype=bool),
        )
        forwarded = forwarded.concat(noise)
    logger.debug(
        f"Pass {pass_index}: siphoned {stash.intensity()} "
        f"({stash.good_count()} good), forwarding {forwarded.intensity()}"
    )
    return forwarded, stash


def photon_vector_after(N: int, alpha: float, passes: int) -> PhotonVector:
    """Expected {good, bad} after ``passes`` rounds of uniform siphon-and-replace."""
    if N < 0:
        raise ParameterError(f"N must be >= 0, got {N}")
    if not 0.0 <= alpha < 1.0:
        raise ParameterError(f"alpha must be in [0, 1), got {alpha}")
    if passes not in PASSES:
        raise ParameterError(f"passes must be 1, 2 or 3, got {passes}")
    surviving = (1.0 - alpha) ** passes
    return PhotonVector(good=N * surviving, bad=N * (1.0 - surviving))


def eve_stash_snr(stash: PhotonPulse) -> float:
    """Good-to-bad ratio of a stash; infinite when it holds no injected photons."""
    bad = stash.bad_count()
    return math.inf if bad == 0 else stash.good_count() / bad


def _random_candidate(model: TomographyModel, rng: np.random.Generator) -> PolarizationState:
    return PolarizationState(model.angle_set.random_angle(rng))


def _maximum_likelihood(stash: PhotonPulse, candidates: np.ndarray, rng: np.random.Generator) -> int:
    """Index of the candidate angle that best explains the outcomes.

    Photon i is measured against candidate basis i mod s, so leftover photons land on
    the lowest-index candidates.
    """
    s = candidates.size
    assignment = np.arange(stash.intensity()) % s
    p_pass = malus_probability(stash.angles - candidates[assignment], PolarizationState(0.0))
    outcomes = rng.random(p_pass.size) < p_pass

    trials = np.bincount(assignment, minlength=s)
    ones = np.bincount(assignment, weights=outcomes.astype(float), minlength=s)
    zeros = trials - ones

    # model[c, b]: probability that a photon at candidate c passes basis b
    model = malus_probability(candidates[:, None] - candidates[None, :], PolarizationState(0.0))
    log_likelihood = (xlogy(ones[None, :], model) + xlogy(zeros[None, :], 1.0 - model)).sum(axis=1)

    best = np.flatnonzero(log_likelihood == log_likelihood.max())
    return int(best[0] if best.size == 1 else rng.choice(best))


def estimate_angle(
    stash: PhotonPulse,
    model: TomographyModel,
    true_angle: PolarizationState,
    rng: np.random.Generator,
) -> TomographyResult:
    """Estimate the signal polarization from a stash.

    ABSTRACT_THRESHOLD succeeds iff the stash holds at least ``p_min`` good photons.
    PHYSICAL_ML measures the stash across the candidate bases and picks the most
    likely candidate, succeeding iff that is the true angle.
    """
    if stash.intensity() == 0:
        return TomographyResult(estimate=_random_candidate(model, rng), success=False, photons_used=0)

    if model.kind is TomographyKind.ABSTRACT_THRESHOLD:
        if stash.good_count() >= model.p_min:
            return TomographyResult(estimate=true_angle, success=True, photons_used=stash.intensity())
        return TomographyResult(
            estimate=_random_candidate(model, rng), success=False, photons_used=stash.intensity()
        )

    candidates = np.array([model.angle_set.angle(i) for i in range(model.angle_set.size)])
    estimate = PolarizationState(float(candidates[_maximum_likelihood(stash, candidates, rng)]))
    return TomographyResult(estimate=estimate, success=estimate == true_angle, photons_used=stash.intensity())


def constant_yield_schedule(pulse_size: int, good_needed: int, passes: int = 3) -> List[int]:
    """Photons Eve must take per pass to expect ``good_needed`` signal photons each time.

    Assumes siphon-and-replace, so the stream stays at ``pulse_size`` photons while its
    good share shrinks: take ceil(N * p / expected_good) on every pass.
    """
    if good_needed < 1 or pulse_size < good_needed:
        raise ParameterError(f"need 1 <= good_needed <= pulse_size, got {good_needed} of {pulse_size}")
    schedule = []
    good = float(pulse_size)
    for _ in range(passes):
        if good <= 0:
            raise ParameterError("stream holds no good photons left to siphon")
        taken = min(pulse_size, math.ceil(round(pulse_size * good_needed / good, 9)))
        schedule.append(taken)
        good -= taken * good / pulse_size
    return schedule


class Eavesdropper:
    """Eve for one session: runs the plan on every pass and keeps what she siphons."""

    def __init__(self, plan: AttackPlan, session_seed: int = 0):
        """Initialize eavesdropper.

        Args:
            plan: Attack plan
            session_seed: Seed of the session being attacked, mixed with the plan seed
        """
        self.plan = plan
        self.rng = np.random.default_rng(np.random.SeedSequence([plan.seed, session_seed]))
        self.stashes: Dict[int, PhotonPulse] = {}

    def intercept_pass(self, pulse: PhotonPulse, pass_index: int) -> PhotonPulse:
        forwarded, stash = intercept(pulse, pass_index, self.plan, self.rng)
        self.stashes[pass_index] = stash
        return forwarded

    def siphoned_photons(self) -> int:
        return sum(stash.intensity() for stash in self.stashes.values())

    def assess(self, pass_states: Sequence[PolarizationState]) -> List[TomographyResult]:
        """Run tomography on every pass's stash against the true signal polarization."""
        results = []
        for pass_index, true_state in zip(PASSES, pass_states):
            stash = self.stashes.get(pass_index, PhotonPulse.empty())
            results.append(estimate_angle(stash, self.plan.tomography, true_state, self.rng))
        return results

    def broke_session(self, pass_states: Sequence[PolarizationState]) -> bool:
        """True when tomography succeeded on all three passes."""
        return all(result.success for result in self.assess(pass_states))
