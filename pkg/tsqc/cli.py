"""Command-line front end: one subcommand per reproducible artifact."""

import argparse
import logging
import sys
import time
from typing import Callable, Dict, List, Optional, Sequence

import configargparse

from tsqc import __version__, reporting
from tsqc.adversary import Eavesdropper, TomographyKind
from tsqc.analytics import TABLE_GRID, ProtocolKind, classify_protocol, intensity_budget_table, snr_general
from tsqc.config import SimulatorConfig
from tsqc.logging_config import setup_logging
from tsqc.metrics import SimulationMetrics
from tsqc.montecarlo import SWEEPABLE, reproduce_worked_example, run_experiment, snr_curve
from tsqc.optics import SplitMode
from tsqc.protocol import GPolicyMode, run_three_stage

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2


def _add_common(parser: configargparse.ArgParser) -> None:
    parser.add('-c', '--config', is_config_file=True, help='Flat key = value config file')
    parser.add('--seed', type=int, env_var='TSQC_SEED', help='Master seed (default 0)')
    parser.add('--out', default='-', help="Output file, '-' for stdout")
    parser.add('--metrics-file', env_var='TSQC_METRICS_FILE', help='Write Prometheus textfile metrics here')

    logging_group = parser.add_argument_group('Logging')
    logging_group.add('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
                      env_var='TSQC_LOG_LEVEL', help='Log level (default WARNING)')
    logging_group.add('--log-format', choices=['standard', 'json'], env_var='TSQC_LOG_FORMAT', help='Log format')
    logging_group.add('--log-file', env_var='TSQC_LOG_FILE', help='Rotating log file path')
    logging_group.add('--log-to-console', action='store_true', default=None, env_var='TSQC_LOG_TO_CONSOLE',
                      help='Log to stderr')


def _add_session(parser: configargparse.ArgParser) -> None:
    group = parser.add_argument_group('Session')
    group.add('--pulse-size', type=int, env_var='TSQC_PULSE_SIZE', help='Photons N in the burst (default 1000)')
    group.add('--alpha', type=float, env_var='TSQC_ALPHA', help='Checkpoint diversion fraction (default 0.1)')
    group.add('--bit', type=int, choices=[0, 1], env_var='TSQC_BIT', help='Bit to send (default 0)')
    group.add('--channel-loss', type=float, env_var='TSQC_CHANNEL_LOSS', help='Per-pass loss probability')
    group.add('--split-mode', choices=[m.value for m in SplitMode], env_var='TSQC_SPLIT_MODE',
              help='Beam splitter model (default deterministic)')
    group.add('--angle-set-size', type=int, env_var='TSQC_ANGLE_SET_SIZE', help='Rotation angles s (default 16)')
    group.add('--session-index', type=int, env_var='TSQC_SESSION_INDEX', help='Session number in a series')

    g_group = parser.add_argument_group('Detection threshold')
    g_group.add('--g', type=float, env_var='TSQC_G', help='Threshold in constant mode (default 0.2)')
    g_group.add('--g-mode', choices=[m.value for m in GPolicyMode], env_var='TSQC_G_MODE', help='g policy')
    g_group.add('--g-schedule', type=float, nargs='+', help='Pre-shared thresholds')
    g_group.add('--g-range', type=float, nargs=2, metavar=('LOW', 'HIGH'),
                help='Negotiate a schedule uniformly from [LOW, HIGH]')
    g_group.add('--g-schedule-length', type=int, help='Negotiated schedule length (default 8)')


def _add_attack(parser: configargparse.ArgParser) -> None:
    group = parser.add_argument_group('Eavesdropper')
    group.add('--siphon', type=float, env_var='TSQC_SIPHON', help='Uniform siphon fraction on every pass')
    group.add('--siphon-fractions', type=float, nargs=3, metavar=('A1', 'A2', 'A3'), help='Per-pass fractions')
    group.add('--replace', action='store_true', default=None, env_var='TSQC_REPLACE',
              help='Replace siphoned photons with random ones')
    group.add('--tomography', choices=[k.value for k in TomographyKind], env_var='TSQC_TOMOGRAPHY',
              help='Estimator (default abstract_threshold)')
    group.add('--p-min', type=int, env_var='TSQC_P_MIN', help='Good photons for identification (default 20)')
    group.add('--attack-seed', type=int, env_var='TSQC_ATTACK_SEED', help='Eavesdropper seed')


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = configargparse.ArgParser(
        description=f'Three-stage quantum cryptography simulator v{__version__}',
        prog='tsqc',
    )
    parser.add('--version', action='version', version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='command', required=True)

    def subcommand(name: str, help_text: str) -> configargparse.ArgParser:
        sub = subparsers.add_parser(
            name,
            help=help_text,
            description=help_text,
            ignore_unknown_config_file_keys=True,
        )
        _add_common(sub)
        return sub

    run = subcommand('run', 'Run one protocol session and report every checkpoint')
    _add_session(run)
    _add_attack(run)
    run.add('--json', action='store_true', help='Emit the machine-readable report')

    table1 = subcommand('table1', 'Overall intensity fraction over the alpha/beta grid')
    table1.add('--g', type=float, default=0.2, help='Detection threshold')
    table1.add('--alphas', type=float, nargs='+', default=list(TABLE_GRID), help='Diversion fractions')
    table1.add('--betas', type=float, nargs='+', default=list(TABLE_GRID), help='Siphon fractions')

    snr = subcommand('snr', 'Bob\'s SNR against the siphon fraction')
    snr.add('--alpha-min', type=float, default=0.01, help='First siphon fraction')
    snr.add('--alpha-max', type=float, default=0.5, help='Last siphon fraction')
    snr.add('--steps', type=int, default=50, help='Evenly spaced points')
    snr.add('--a1', type=float, help='Pass-1 fraction (with --a2 and --a3: single general value)')
    snr.add('--a2', type=float, help='Pass-2 fraction')
    snr.add('--a3', type=float, help='Pass-3 fraction')

    classify = subcommand('classify', 'Print the (p-k-n) threshold class of a protocol')
    classify.add('kind', choices=[k.value for k in ProtocolKind], help='Protocol')
    classify.add('--p', type=int, help='Photons at which the protocol becomes partially secure')
    classify.add('--n', type=int, help='Photons transmitted')

    experiment = subcommand('experiment', 'Seeded batch of sessions, optionally swept over one parameter')
    _add_session(experiment)
    _add_attack(experiment)
    experiment_group = experiment.add_argument_group('Experiment')
    experiment_group.add('--trials', type=int, env_var='TSQC_TRIALS', help='Sessions per cell (default 100)')
    experiment_group.add('--sweep-parameter', choices=list(SWEEPABLE), help='Parameter to sweep')
    experiment_group.add('--sweep-values', type=float, nargs='+', help='Values of the swept parameter')
    experiment_group.add('--workers', type=int, env_var='TSQC_WORKERS', help='Worker threads (default 1)')
    experiment_group.add('--randomize-bit', action='store_true', default=None, help='Random bit per trial')

    worked = subcommand('worked-example', 'Replay the scripted constant-yield siphoning attack')
    worked.add('--trials', type=int, default=10_000, help='Bursts averaged')
    worked.add('--pulse-size', type=int, default=100, help='Photons in the burst')
    worked.add('--good-needed', type=int, default=20, help='Signal photons Eve extracts per pass')

    return parser.parse_args(argv)


def cmd_run(config: SimulatorConfig, json_output: bool = False, metrics: Optional[SimulationMetrics] = None) -> str:
    """Run one session and render its report."""
    session_config = config.get_session_config()
    plan = config.get_attack_plan()
    eve = Eavesdropper(plan, session_seed=session_config.seed) if plan is not None else None
    start = time.perf_counter()
    outcome = run_three_stage(session_config, eve)
    duration = time.perf_counter() - start

    eve_results = eve.assess(outcome.pass_states) if eve is not None else None
    siphoned = eve.siphoned_photons() if eve is not None else 0
    if metrics is not None:
        metrics.record_session(outcome, duration, attacked=eve is not None, siphoned=siphoned)

    report = reporting.session_report(outcome, session_config.seed, eve_results, siphoned)
    if json_output:
        return reporting.session_report_json(report)
    return reporting.session_report_text(report)


def cmd_table1(g: float = 0.2, alphas: Sequence[float] = TABLE_GRID, betas: Sequence[float] = TABLE_GRID) -> str:
    """Intensity budget table as CSV."""
    return reporting.table1_csv(intensity_budget_table(g, alphas, betas))


def cmd_snr(
    alpha_min: float = 0.01,
    alpha_max: float = 0.5,
    steps: int = 50,
    a1: Optional[float] = None,
    a2: Optional[float] = None,
    a3: Optional[float] = None,
) -> str:
    """SNR curve as CSV, or the single per-pass value when a1, a2 and a3 are all given."""
    given = [a is not None for a in (a1, a2, a3)]
    if all(given):
        return reporting.general_snr_csv(a1, a2, a3, snr_general(a1, a2, a3))
    if any(given):
        raise ValueError("--a1, --a2 and --a3 must be given together")
    return reporting.snr_curve_csv(snr_curve(alpha_min, alpha_max, steps))


def cmd_classify(kind: str, p: Optional[int] = None, n: Optional[int] = None) -> str:
    return reporting.classification_text(classify_protocol(ProtocolKind(kind), p, n))


def cmd_experiment(config: SimulatorConfig, metrics: Optional[SimulationMetrics] = None) -> str:
    """Run the configured experiment and render one CSV row per cell."""
    spec = config.get_experiment_spec()
    return reporting.experiment_csv(run_experiment(spec, metrics))


def cmd_worked_example(seed: int = 0, trials: int = 10_000, pulse_size: int = 100, good_needed: int = 20) -> str:
    trace = reproduce_worked_example(seed=seed, trials=trials, pulse_size=pulse_size, good_needed=good_needed)
    return reporting.worked_example_csv(trace)


def _dispatch(args: argparse.Namespace, config: SimulatorConfig, metrics: Optional[SimulationMetrics]) -> str:
    handlers: Dict[str, Callable[[], str]] = {
        'run': lambda: cmd_run(config, json_output=args.json, metrics=metrics),
        'table1': lambda: cmd_table1(args.g, args.alphas, args.betas),
        'snr': lambda: cmd_snr(args.alpha_min, args.alpha_max, args.steps, args.a1, args.a2, args.a3),
        'classify': lambda: cmd_classify(args.kind, args.p, args.n),
        'experiment': lambda: cmd_experiment(config, metrics),
        'worked-example': lambda: cmd_worked_example(config.seed, args.trials, args.pulse_size, args.good_needed),
    }
    return handlers[args.command]()


def _write_output(text: str, destination: str) -> None:
    if destination == '-':
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(destination, 'w', encoding='utf-8', newline='') as handle:
        handle.write(text)


def _build_config(args: argparse.Namespace) -> SimulatorConfig:
    # table1 owns its --g; it is not the session threshold
    skip = {'g'} if args.command == 'table1' else set()
    values = {key: value for key, value in vars(args).items() if value is not None and key not in skip}
    return SimulatorConfig(**values)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point.

    Returns:
        0 on success, 1 on a configuration error, 2 on a runtime failure
    """
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG_ERROR

    try:
        config = _build_config(args)
        logging_config = config.get_logging_config()
    except ValueError as e:
        print(f"tsqc: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    setup_logging(
        level=logging_config.level,
        format_type=logging_config.format,
        log_file=logging_config.file,
        console=logging_config.console,
        max_bytes=logging_config.max_bytes,
        backup_count=logging_config.backup_count,
        context={'command': args.command, 'seed': config.seed},
    )
    logger.info(f"tsqc v{__version__}: {args.command} (seed={config.seed})")

    metrics = SimulationMetrics() if config.metrics_file else None
    try:
        output = _dispatch(args, config, metrics)
    except ValueError as e:
        logger.debug("Configuration rejected", exc_info=True)
        print(f"tsqc: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as e:
        logger.exception(f"{args.command} failed")
        print(f"tsqc: {args.command} failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR

    try:
        _write_output(output, args.out)
        if metrics is not None:
            metrics.write(config.metrics_file)
    except OSError as e:
        logger.exception("Failed to write output")
        print(f"tsqc: cannot write output: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    return EXIT_OK
