"""Prometheus counters for simulation runs, dumped to a textfile on request."""

import logging
import threading
from pathlib import Path
from typing import Optional, Union

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

from tsqc.protocol import SessionOutcome

logger = logging.getLogger(__name__)


class SimulationMetrics:
    """Session counters kept in a private registry.

    Each instance owns its registry, so several experiments in one process never
    share or double-register collectors.
    """

    def __init__(self, registry: Optional[CollectorRegistry] = None):
        self.registry = registry or CollectorRegistry()
        self._lock = threading.Lock()
        self.sessions = Counter(
            'tsqc_sessions_total', 'Protocol sessions run', ['attack'], registry=self.registry
        )
        self.breaches = Counter(
            'tsqc_breaches_total', 'Sessions with a detected intensity breach', ['stage'], registry=self.registry
        )
        self.decode_failures = Counter(
            'tsqc_decode_failures_total', 'Sessions whose bit was not recovered', registry=self.registry
        )
        self.intercepted_photons = Counter(
            'tsqc_intercepted_photons_total', 'Photons siphoned by the eavesdropper', registry=self.registry
        )
        self.session_duration = Histogram(
            'tsqc_session_duration_seconds', 'Wall time of one session', registry=self.registry
        )

    def record_session(
        self,
        outcome: SessionOutcome,
        duration: float,
        attacked: bool = False,
        siphoned: int = 0,
    ) -> None:
        """Record one finished session.

        Args:
            outcome: Session outcome
            duration: Wall time in seconds
            attacked: Whether an eavesdropper was active
            siphoned: Photons the eavesdropper took
        """
        with self._lock:
            self.sessions.labels(attack='yes' if attacked else 'no').inc()
            if outcome.breach_stage is not None:
                self.breaches.labels(stage=outcome.breach_stage.value).inc()
            if not outcome.decoded_correctly:
                self.decode_failures.inc()
            if siphoned:
                self.intercepted_photons.inc(siphoned)
            self.session_duration.observe(duration)

    def value(self, name: str, labels: Optional[dict] = None) -> float:
        """Current sample value, 0.0 when the series does not exist yet."""
        sample = self.registry.get_sample_value(name, labels or {})
        return 0.0 if sample is None else sample

    def write(self, path: Union[str, Path]) -> None:
        """Write the registry in Prometheus textfile format."""
        write_to_textfile(str(path), self.registry)
        logger.info(f"Metrics written to {path}")
