"""Top-level package for the three-stage quantum cryptography simulator."""

import logging

__version__ = '0.1.0'

_main_logger = logging.getLogger(__name__)

# Expose the main entry points
from tsqc.adversary import AttackPlan, Eavesdropper, TomographyKind, TomographyModel  # noqa: E402
from tsqc.config import SimulatorConfig  # noqa: E402
from tsqc.errors import ConfigurationError, ParameterError, PhotonConsumedError, TsqcError  # noqa: E402
from tsqc.montecarlo import ExperimentSpec, Sweep, run_experiment  # noqa: E402
from tsqc.protocol import AngleSet, GPolicy, SessionConfig, run_three_stage  # noqa: E402

__all__ = [
    '__version__',
    'AngleSet',
    'AttackPlan',
    'ConfigurationError',
    'Eavesdropper',
    'ExperimentSpec',
    'GPolicy',
    'ParameterError',
    'PhotonConsumedError',
    'SessionConfig',
    'SimulatorConfig',
    'Sweep',
    'TomographyKind',
    'TomographyModel',
    'TsqcError',
    'run_experiment',
    'run_three_stage',
]
