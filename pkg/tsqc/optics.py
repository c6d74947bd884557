"""Polarization optics: linear states, commutative rotations, Malus measurement and beam splitting.

Linear polarization is direction-free, so every angle lives in [0, pi). Pulses are
numpy-backed so that bursts of 10^5 photons stay cheap to rotate, split and measure.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Tuple

import numpy as np

from tsqc.errors import ParameterError, PhotonConsumedError

logger = logging.getLogger(__name__)

ANGLE_TOLERANCE = 1e-12


def reduce_angle(angle: float) -> float:
    """Reduce an angle in radians to [0, pi)."""
    reduced = math.fmod(angle, math.pi)
    if reduced < 0:
        reduced += math.pi
    # fmod of a tiny negative angle can round up to exactly pi
    if reduced >= math.pi:
        reduced = 0.0
    return reduced


def _reduce_array(angles: np.ndarray) -> np.ndarray:
    reduced = np.mod(angles, np.pi)
    reduced[reduced >= np.pi] = 0.0
    return reduced


def angle_distance(a: float, b: float) -> float:
    """Distance between two linear polarization angles on the pi-periodic circle."""
    diff = reduce_angle(a - b)
    return min(diff, math.pi - diff)


@dataclass(frozen=True, eq=False)
class PolarizationState:
    """A linear polarization angle, canonically reduced modulo pi."""

    angle: float

    def __post_init__(self) -> None:
        object.__setattr__(self, 'angle', reduce_angle(float(self.angle)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolarizationState):
            return NotImplemented
        return angle_distance(self.angle, other.angle) <= ANGLE_TOLERANCE

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"PolarizationState({self.angle / math.pi:.6g}*pi)"


@dataclass(frozen=True)
class RotationOp:
    """Planar rotation by ``delta`` radians; rotations commute and invert by negation."""

    delta: float

    def apply(self, state: PolarizationState) -> PolarizationState:
        return PolarizationState(state.angle + self.delta)

    def inverse(self) -> 'RotationOp':
        return RotationOp(-self.delta)

    def then(self, other: 'RotationOp') -> 'RotationOp':
        """Compose with a second rotation applied afterwards."""
        return RotationOp(self.delta + other.delta)


class Provenance(Enum):
    """Where a photon came from."""

    SIGNAL = "signal"
    INJECTED = "injected"


class Photon:
    """A single photon; a projective measurement consumes it."""

    __slots__ = ('_state', '_provenance', '_consumed')

    def __init__(self, state: PolarizationState, provenance: Provenance = Provenance.SIGNAL):
        self._state = state
        self._provenance = provenance
        self._consumed = False

    @property
    def state(self) -> PolarizationState:
        return self._state

    @property
    def provenance(self) -> Provenance:
        return self._provenance

    @property
    def consumed(self) -> bool:
        return self._consumed

    def __repr__(self) -> str:
        return f"Photon({self._state!r}, {self._provenance.value})"


class SplitMode(str, Enum):
    """How a beam splitter chooses the diverted photons."""

    DETERMINISTIC = "deterministic"
    BINOMIAL = "binomial"


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PhotonPulse:
    """An ordered multi-photon burst.

    Attributes:
        angles: Polarization angle of every photon, reduced to [0, pi)
        injected: True where the photon was injected by the eavesdropper
    """

    angles: np.ndarray = field(default_factory=lambda: np.empty(0))
    injected: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))

    def __post_init__(self) -> None:
        angles = _reduce_array(np.array(self.angles, dtype=float).ravel())
        injected = np.array(self.injected, dtype=bool).ravel()
        if angles.shape != injected.shape:
            raise ParameterError(
                f"angles and provenance must have equal length ({angles.size} != {injected.size})"
            )
        object.__setattr__(self, 'angles', _frozen(angles))
        object.__setattr__(self, 'injected', _frozen(injected))

    @classmethod
    def empty(cls) -> 'PhotonPulse':
        return cls()

    @classmethod
    def uniform(cls, count: int, state: PolarizationState,
                provenance: Provenance = Provenance.SIGNAL) -> 'PhotonPulse':
        """Build ``count`` identically prepared photons."""
        if count < 0:
            raise ParameterError(f"photon count must be >= 0, got {count}")
        return cls(
            angles=np.full(count, state.angle),
            injected=np.full(count, provenance is Provenance.INJECTED),
        )

    @classmethod
    def from_photons(cls, photons: Iterable[Photon]) -> 'PhotonPulse':
        photons = list(photons)
        return cls(
            angles=np.array([p.state.angle for p in photons], dtype=float),
            injected=np.array([p.provenance is Provenance.INJECTED for p in photons], dtype=bool),
        )

    def intensity(self) -> int:
        return int(self.angles.size)

    def good_count(self) -> int:
        return int(self.angles.size - np.count_nonzero(self.injected))

    def bad_count(self) -> int:
        return int(np.count_nonzero(self.injected))

    def photons(self) -> Iterator[Photon]:
        for angle, injected in zip(self.angles, self.injected):
            yield Photon(
                PolarizationState(float(angle)),
                Provenance.INJECTED if injected else Provenance.SIGNAL,
            )

    def concat(self, other: 'PhotonPulse') -> 'PhotonPulse':
        return PhotonPulse(
            angles=np.concatenate([self.angles, other.angles]),
            injected=np.concatenate([self.injected, other.injected]),
        )

    def select(self, mask: np.ndarray) -> 'PhotonPulse':
        return PhotonPulse(angles=self.angles[mask], injected=self.injected[mask])

    def __len__(self) -> int:
        return self.intensity()


def rotate(pulse: PhotonPulse, op: RotationOp) -> PhotonPulse:
    """Rotate every photon of the pulse; provenance and count are unchanged."""
    return PhotonPulse(angles=pulse.angles + op.delta, injected=pulse.injected.copy())


def malus_probability(angles: np.ndarray, basis: PolarizationState) -> np.ndarray:
    """Probability that each photon passes a polarizer aligned with ``basis``."""
    probability = np.cos(np.asarray(angles, dtype=float) - basis.angle) ** 2
    probability[probability < ANGLE_TOLERANCE] = 0.0
    probability[probability > 1.0 - ANGLE_TOLERANCE] = 1.0
    return probability


def measure_photon(photon: Photon, basis: PolarizationState, rng: np.random.Generator) -> int:
    """Projectively measure one photon: 1 with probability cos^2(angle - basis), else 0.

    Raises:
        PhotonConsumedError: If the photon was measured before
    """
    if photon.consumed:
        raise PhotonConsumedError(f"{photon!r} was already measured")
    photon._consumed = True
    probability = malus_probability(np.array([photon.state.angle]), basis)[0]
    return int(rng.random() < probability)


def measure_pulse(pulse: PhotonPulse, basis: PolarizationState, rng: np.random.Generator) -> np.ndarray:
    """Measure every photon of a pulse in one basis; returns an int array of outcomes."""
    probability = malus_probability(pulse.angles, basis)
    return (rng.random(probability.size) < probability).astype(np.int64)


def deterministic_count(fraction: float, total: int) -> int:
    """Round-half-up count of ``fraction`` of ``total`` photons."""
    return int(math.floor(fraction * total + 0.5))


def split_fraction(
    pulse: PhotonPulse,
    fraction: float,
    mode: SplitMode,
    rng: np.random.Generator,
) -> Tuple[PhotonPulse, PhotonPulse]:
    """Divert a fraction of a pulse, as a beam splitter would.

    Args:
        pulse: Incoming pulse
        fraction: Fraction to divert, in [0, 1]
        mode: DETERMINISTIC diverts exactly round(fraction * intensity) photons chosen
            uniformly without replacement; BINOMIAL diverts each photon independently
        rng: Random stream

    Returns:
        (diverted, remainder), both keeping the original photon order

    Raises:
        ParameterError: If fraction is outside [0, 1]
    """
    if not 0.0 <= fraction <= 1.0:
        raise ParameterError(f"split fraction must be in [0, 1], got {fraction}")

    total = pulse.intensity()
    mask = np.zeros(total, dtype=bool)
    if SplitMode(mode) is SplitMode.DETERMINISTIC:
        count = deterministic_count(fraction, total)
        if count:
            mask[rng.choice(total, size=count, replace=False)] = True
    else:
        mask = rng.random(total) < fraction

    return pulse.select(mask), pulse.select(~mask)
