"""Text, JSON and CSV renderers for command output."""

import csv
import io
import json
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from tsqc.adversary import TomographyResult
from tsqc.analytics import IntensityBudgetTable, ThresholdClass
from tsqc.montecarlo import ExperimentResult, WorkedExampleTrace
from tsqc.protocol import SessionOutcome

MISSING = "NA"

EXPERIMENT_HEADER = [
    'cell',
    'detection_rate',
    'detection_ci',
    'decode_accuracy',
    'mean_final_snr',
    'eve_success_rate',
    'trials',
]
WORKED_EXAMPLE_HEADER = [
    'pass',
    'photons_taken',
    'stream_good',
    'stream_bad',
    'stash_good',
    'stash_bad',
    'planned_snr',
    'empirical_snr',
]


def format_number(value: Optional[float], missing: str = MISSING) -> str:
    """Six significant digits; ``missing`` for None, ``inf`` for infinity."""
    if value is None:
        return missing
    if isinstance(value, int):
        return str(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.6g}"


def _grid_label(value: float) -> str:
    # two decimals on the 0.01 grid: 0.1 prints as 0.10
    return f"{value:.2f}" if round(value, 2) == value else format_number(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def table1_csv(table: IntensityBudgetTable) -> str:
    """Intensity budget matrix; blank cells are left empty."""
    header = ['alpha'] + [f"beta_{_grid_label(beta)}" for beta in table.betas]
    rows = [
        [format_number(alpha)] + [format_number(value, missing="") for value in row]
        for alpha, row in zip(table.alphas, table.cells)
    ]
    return render_csv(header, rows)


def snr_curve_csv(points: Sequence[Tuple[float, float]]) -> str:
    return render_csv(['alpha', 'snr'], ([format_number(a), format_number(s)] for a, s in points))


def general_snr_csv(a1: float, a2: float, a3: float, snr: float) -> str:
    return render_csv(['a1', 'a2', 'a3', 'snr'], [[format_number(v) for v in (a1, a2, a3, snr)]])


def experiment_csv(result: ExperimentResult) -> str:
    """One row per sweep cell."""
    rows = [
        [
            cell.label,
            format_number(cell.detection_rate),
            format_number(cell.detection_ci),
            format_number(cell.decode_accuracy),
            format_number(cell.mean_final_snr),
            format_number(cell.eve_success_rate),
            str(cell.trials),
        ]
        for cell in result.cells
    ]
    return render_csv(EXPERIMENT_HEADER, rows)


def worked_example_csv(trace: WorkedExampleTrace) -> str:
    rows = [
        [
            str(p.pass_index),
            str(p.photons_taken),
            format_number(float(p.stream.good)),
            format_number(float(p.stream.bad)),
            format_number(float(p.stash.good)),
            format_number(float(p.stash.bad)),
            format_number(float(p.planned_snr)),
            format_number(float(p.empirical_snr)),
        ]
        for p in trace.passes
    ]
    return render_csv(WORKED_EXAMPLE_HEADER, rows)


def classification_text(threshold: ThresholdClass) -> str:
    """The (p-k-n) triple followed by its three security regimes."""
    title = threshold.label
    if not threshold.has_threshold:
        title += " (no threshold property)"
    lines = [
        title,
        f"  fewer than {threshold.p} photons: secure",
        f"  {threshold.p} to {threshold.k} photons: partially secure",
        f"  more than {threshold.k} photons: insecure",
    ]
    return "\n".join(lines) + "\n"


def _json_number(value: float) -> Any:
    return "inf" if math.isinf(value) else value


def session_report(
    outcome: SessionOutcome,
    seed: int,
    eve_results: Optional[List[TomographyResult]] = None,
    siphoned: int = 0,
) -> Dict[str, Any]:
    """Machine-readable session report."""
    good, bad = outcome.final_pulse_composition
    report: Dict[str, Any] = {
        'seed': seed,
        'bit_sent': outcome.bit_sent,
        'decoded_bit': outcome.decoded_bit,
        'decoded_correctly': outcome.decoded_correctly,
        'breach_detected': outcome.breach_detected,
        'breach_stage': outcome.breach_stage.value if outcome.breach_stage else None,
        'theta': outcome.theta,
        'phi': outcome.phi,
        'final_good': good,
        'final_bad': bad,
        'final_snr': _json_number(outcome.final_snr),
        'diagnostic': outcome.diagnostic,
        'stages': [
            {
                'stage': record.stage.value,
                'expected': record.expected,
                'observed': record.observed,
                'g': record.g,
                'verdict': record.verdict.value,
            }
            for record in outcome.intensity_records
        ],
        'eavesdropper': None,
    }
    if eve_results is not None:
        report['eavesdropper'] = {
            'siphoned': siphoned,
            'tomography_success': [result.success for result in eve_results],
            'broke_session': all(result.success for result in eve_results),
        }
    return report


def session_report_json(report: Dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def session_report_text(report: Dict[str, Any]) -> str:
    lines = [f"Session seed={report['seed']} bit sent={report['bit_sent']}"]
    for stage in report['stages']:
        lines.append(
            f"  {stage['stage']:<13} expected={stage['expected']:10.3f} "
            f"observed={stage['observed']:7d} g={stage['g']:.4g} {stage['verdict'].upper()}"
        )
    if report['breach_detected']:
        lines.append(f"Breach detected at {report['breach_stage']}")
    else:
        lines.append("No breach detected")
    decoded = report['decoded_bit']
    verdict = "correct" if report['decoded_correctly'] else "incorrect"
    lines.append(f"Decoded bit: {'undecodable' if decoded is None else decoded} ({verdict})")
    lines.append(f"Final pulse: {report['final_good']} good, {report['final_bad']} bad")
    if report['diagnostic']:
        lines.append(f"Diagnostic: {report['diagnostic']}")
    eve = report['eavesdropper']
    if eve is not None:
        passes = ", ".join("hit" if hit else "miss" for hit in eve['tomography_success'])
        lines.append(f"Eavesdropper: siphoned {eve['siphoned']} photons, tomography {passes}")
    return "\n".join(lines) + "\n"
