"""Closed-form security analysis: SNR, intensity budget, photon bounds and (p-k-n) classification."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from scipy import optimize

from tsqc.errors import ParameterError

logger = logging.getLogger(__name__)

DEFAULT_G = 0.2
TABLE_GRID = tuple(round(0.01 * i, 2) for i in range(1, 11))
BISECTION_TOLERANCE = 1e-10


def _check_fraction(name: str, value: float) -> None:
    if not 0.0 <= value < 1.0:
        raise ParameterError(f"{name} must be in [0, 1), got {value}")


def _snr_from_survival(survival: float) -> float:
    noise = 1.0 - survival
    return math.inf if noise == 0.0 else survival / noise


def snr_uniform(alpha: float) -> float:
    """Bob's final good/bad ratio when Eve siphons and replaces ``alpha`` on every pass."""
    _check_fraction('alpha', alpha)
    return _snr_from_survival((1.0 - alpha) ** 3)


def snr_general(a1: float, a2: float, a3: float) -> float:
    """Bob's final good/bad ratio for per-pass siphon fractions a1, a2, a3."""
    for name, value in (('a1', a1), ('a2', a2), ('a3', a3)):
        _check_fraction(name, value)
    return _snr_from_survival((1.0 - a1) * (1.0 - a2) * (1.0 - a3))


def siphon_fraction_for_snr(target: float) -> float:
    """Uniform siphon fraction at which Bob's SNR falls to ``target``.

    Solves (1 - a)^3 = target / (1 + target) by bisection on [0, 0.5] when the root
    lies there, otherwise on [0, 1).
    """
    if target <= 0 or math.isinf(target):
        raise ParameterError(f"target SNR must be positive and finite, got {target}")
    survival = target / (1.0 + target)

    def excess(alpha: float) -> float:
        return (1.0 - alpha) ** 3 - survival

    upper = 0.5 if excess(0.5) < 0 else 1.0 - 1e-12
    return float(optimize.bisect(excess, 0.0, upper, xtol=BISECTION_TOLERANCE))


def critical_siphon_fraction() -> float:
    """Siphon fraction above which Eve's injected noise outweighs Bob's signal (SNR = 1)."""
    return siphon_fraction_for_snr(1.0)


def overall_intensity_fraction(alpha: float, beta: float) -> float:
    """Share of the source intensity left after three alpha diversions and two beta siphons."""
    _check_fraction('alpha', alpha)
    _check_fraction('beta', beta)
    return (1.0 - alpha) ** 3 * (1.0 - beta) ** 2


def _check_g(g: float) -> None:
    if not 0.0 < g < 1.0:
        raise ParameterError(f"g must be in (0, 1), got {g}")


def table1_feasible(alpha: float, beta: float, g: float = DEFAULT_G) -> bool:
    """True iff the combined reduction stays within the detection threshold g."""
    _check_g(g)
    return overall_intensity_fraction(alpha, beta) >= 1.0 - g


@dataclass(frozen=True)
class IntensityBudgetTable:
    """Rows of overall intensity fractions; None marks a blank cell."""

    g: float
    alphas: Tuple[float, ...]
    betas: Tuple[float, ...]
    cells: Tuple[Tuple[Optional[float], ...], ...]

    def cell(self, alpha: float, beta: float) -> Optional[float]:
        return self.cells[self.alphas.index(alpha)][self.betas.index(beta)]

    def populated(self) -> List[Tuple[float, float, float]]:
        return [
            (alpha, beta, value)
            for alpha, row in zip(self.alphas, self.cells)
            for beta, value in zip(self.betas, row)
            if value is not None
        ]


def intensity_budget_table(
    g: float = DEFAULT_G,
    alphas: Sequence[float] = TABLE_GRID,
    betas: Sequence[float] = TABLE_GRID,
) -> IntensityBudgetTable:
    """Tabulate the intensity budget in its staircase layout.

    Each row lists Eve's siphon levels while the previous level (no siphoning, for the
    first column) is still feasible, so the first level that crosses 1 - g is shown and
    everything after it is blank.
    """
    _check_g(g)
    betas = tuple(sorted(betas))
    rows = []
    for alpha in alphas:
        row: List[Optional[float]] = []
        previous = 0.0
        for beta in betas:
            shown = table1_feasible(alpha, previous, g)
            row.append(overall_intensity_fraction(alpha, beta) if shown else None)
            previous = beta
        rows.append(tuple(row))
    return IntensityBudgetTable(g=g, alphas=tuple(alphas), betas=betas, cells=tuple(rows))


def _check_power_of_two(s: int) -> None:
    if s < 2 or s & (s - 1):
        raise ParameterError(f"s must be a power of two >= 2, got {s}")


def min_siphon_photons(s: int) -> int:
    """Information-theoretic minimum photons Eve must siphon over three passes: 3 log2 s."""
    _check_power_of_two(s)
    return 3 * (s.bit_length() - 1)


def siphon_budget(photons_per_pass: int) -> Tuple[int, int]:
    """(photons Eve siphons over three passes, burst size at which that halves the intensity)."""
    if photons_per_pass < 1:
        raise ParameterError(f"photons per pass must be >= 1, got {photons_per_pass}")
    return 3 * photons_per_pass, 6 * photons_per_pass


def detector_array_budget(s: int) -> Tuple[int, int]:
    """Budget when Eve feeds one photon to each of s aligned detectors per pass: (3s, 6s)."""
    if s < 2:
        raise ParameterError(f"s must be >= 2, got {s}")
    return siphon_budget(s)


class ProtocolKind(str, Enum):
    BB84 = "bb84"
    TSQC = "tsqc"


class SecurityRegime(str, Enum):
    SECURE = "secure"
    PARTIAL = "partially secure"
    INSECURE = "insecure"


@dataclass(frozen=True)
class ThresholdClass:
    """A (p, k, n) threshold classification."""

    p: int
    k: int
    n: int

    def __post_init__(self) -> None:
        if not 1 <= self.p <= self.k <= self.n:
            raise ParameterError(f"need 1 <= p <= k <= n, got ({self.p}, {self.k}, {self.n})")

    @property
    def has_threshold(self) -> bool:
        return not (self.p == self.k == self.n)

    @property
    def label(self) -> str:
        return f"{self.p}-{self.k}-{self.n}"

    def regime(self, photons: int) -> SecurityRegime:
        """Security of an exchange of ``photons`` photons."""
        if photons < self.p:
            return SecurityRegime.SECURE
        if photons <= self.k:
            return SecurityRegime.PARTIAL
        return SecurityRegime.INSECURE


def classify_protocol(kind: ProtocolKind, p: Optional[int] = None, n: Optional[int] = None) -> ThresholdClass:
    """BB84 is (1-1-1); the three-stage protocol is (p-4p-n)."""
    kind = ProtocolKind(kind)
    if kind is ProtocolKind.BB84:
        return ThresholdClass(1, 1, 1)
    if p is None or n is None:
        raise ParameterError("three-stage classification needs both p and n")
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    if n < 4 * p:
        raise ParameterError(f"n must be >= 4p = {4 * p}, got {n}")
    return ThresholdClass(p, 4 * p, n)
