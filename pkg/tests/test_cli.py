"""Tests for the command-line front end."""

import csv
import io
import json

import pytest

from tsqc.cli import main, parse_args


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_parse_args_run_defaults():
    """Test unset session flags stay None so configuration defaults apply."""
    args = parse_args(['run'])
    assert args.command == 'run'
    assert args.out == '-'
    assert args.alpha is None
    assert args.json is False


def test_parse_args_requires_subcommand():
    """Test a missing subcommand is a usage error."""
    with pytest.raises(SystemExit):
        parse_args([])


def test_table1_golden_output(tmp_path):
    """Test the default table reproduces the reference staircase."""
    out = tmp_path / 'table1.csv'
    assert main(['table1', '--out', str(out)]) == 0
    rows = _rows(out.read_text())
    assert rows[0] == ['alpha'] + [f"beta_{b / 100:.2f}" for b in range(1, 11)]
    body = {row[0]: row[1:] for row in rows[1:]}
    assert float(body['0.01'][0]) == pytest.approx(0.951, abs=0.001)
    assert [cell for cell in body['0.07'] if cell] == [body['0.07'][0]]
    assert float(body['0.07'][0]) == pytest.approx(0.788, abs=0.001)
    assert sum(1 for row in body.values() for cell in row if cell) == 37
    assert out.read_text().endswith('\n')


def test_table1_rejects_g_of_one(tmp_path):
    """Test g = 1 is a configuration error and nothing is written."""
    out = tmp_path / 'table1.csv'
    assert main(['table1', '--g', '1.0', '--out', str(out)]) == 1
    assert not out.exists()


def test_snr_curve_output(capsys):
    """Test the SNR column falls monotonically and crosses 1 near 0.2062."""
    assert main(['snr', '--alpha-min', '0.01', '--alpha-max', '0.5', '--steps', '50']) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ['alpha', 'snr']
    values = [float(snr) for _, snr in rows[1:]]
    assert len(values) == 50
    assert all(later < earlier for earlier, later in zip(values, values[1:]))

    assert main(['snr', '--alpha-min', '0.01', '--alpha-max', '0.5', '--steps', '491']) == 0
    points = [(float(a), float(s)) for a, s in _rows(capsys.readouterr().out)[1:]]
    nearest = min(points, key=lambda point: abs(point[0] - 0.2062))
    assert nearest[1] == pytest.approx(1.0, abs=0.02)


def test_snr_general_value(capsys):
    """Test a1, a2, a3 emit the single per-pass value."""
    assert main(['snr', '--a1', '0.2', '--a2', '0.25', '--a3', '0.34']) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ['a1', 'a2', 'a3', 'snr']
    assert float(rows[1][3]) == pytest.approx(0.6556, abs=0.0005)


def test_snr_partial_fractions_rejected():
    """Test a1 alone is a configuration error."""
    assert main(['snr', '--a1', '0.2']) == 1


def test_classify_output(capsys):
    """Test the triple and narrative for both protocols."""
    assert main(['classify', 'bb84']) == 0
    assert capsys.readouterr().out.splitlines()[0] == "1-1-1 (no threshold property)"
    assert main(['classify', 'tsqc', '--p', '5', '--n', '30']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "5-20-30"
    assert "partially secure" in lines[2]


def test_classify_rejects_small_n():
    """Test n < 4p is a configuration error."""
    assert main(['classify', 'tsqc', '--p', '5', '--n', '10']) == 1


def test_run_clean_session_json(capsys):
    """Test a clean session decodes the bit with every check passing."""
    assert main(['run', '--json', '--seed', '42', '--bit', '1']) == 0
    report = json.loads(capsys.readouterr().out)
    assert report['decoded_bit'] == 1
    assert report['breach_detected'] is False
    assert [stage['verdict'] for stage in report['stages']] == ['pass', 'pass', 'pass']
    assert report['eavesdropper'] is None


def test_run_is_reproducible(capsys):
    """Test the same seed gives byte-identical machine-readable output."""
    argv = ['run', '--json', '--seed', '42', '--siphon', '0.1', '--replace']
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_run_reports_breach_stage(capsys):
    """Test the text report names the first breached checkpoint."""
    assert main(['run', '--pulse-size', '2000', '--alpha', '0.05', '--siphon', '0.1']) == 0
    report = capsys.readouterr().out
    assert "Breach detected at bob_final" in report
    assert "Decoded bit: 0" in report


def test_run_invalid_config_writes_nothing(tmp_path):
    """Test an out-of-range alpha exits 1 without output."""
    out = tmp_path / 'report.json'
    assert main(['run', '--alpha', '1.5', '--out', str(out)]) == 1
    assert not out.exists()


def test_run_unknown_flag_is_usage_error():
    """Test argparse errors map to exit code 1."""
    assert main(['run', '--no-such-flag']) == 1


def test_config_file_and_override(tmp_path, capsys):
    """Test flat config files apply and command-line flags win."""
    config = tmp_path / 'tsqc.conf'
    config.write_text("pulse-size = 300\nalpha = 0.05\ntrials = 5\n")
    assert main(['run', '--config', str(config), '--json']) == 0
    stages = json.loads(capsys.readouterr().out)['stages']
    assert stages[0]['expected'] == pytest.approx(15.0)

    assert main(['run', '--config', str(config), '--alpha', '0.1', '--json']) == 0
    stages = json.loads(capsys.readouterr().out)['stages']
    assert stages[0]['expected'] == pytest.approx(30.0)


def test_environment_variables(monkeypatch, capsys):
    """Test TSQC_ environment variables feed the configuration."""
    monkeypatch.setenv('TSQC_PULSE_SIZE', '400')
    assert main(['run', '--json']) == 0
    stages = json.loads(capsys.readouterr().out)['stages']
    assert stages[0]['expected'] == pytest.approx(40.0)


def test_experiment_csv(tmp_path):
    """Test one row per sweep cell with stable columns and byte-identical reruns."""
    argv = [
        'experiment', '--pulse-size', '2000', '--alpha', '0.05', '--siphon', '0.05',
        '--sweep-parameter', 'beta', '--sweep-values', '0.05', '0.1', '0.2',
        '--trials', '10', '--seed', '7',
    ]
    first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
    assert main(argv + ['--out', str(first)]) == 0
    assert main(argv + ['--out', str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()

    rows = _rows(first.read_text())
    assert rows[0] == [
        'cell', 'detection_rate', 'detection_ci', 'decode_accuracy', 'mean_final_snr', 'eve_success_rate', 'trials',
    ]
    assert [row[0] for row in rows[1:]] == ['beta=0.05', 'beta=0.1', 'beta=0.2']
    rates = [float(row[1]) for row in rows[1:]]
    assert rates == sorted(rates)
    assert all(row[6] == '10' for row in rows[1:])


def test_experiment_single_trial_has_na_half_width(capsys):
    """Test trials = 1 leaves the half-width column NA."""
    assert main(['experiment', '--pulse-size', '100', '--trials', '1']) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[1][0] == 'base'
    assert rows[1][2] == 'NA'


def test_experiment_invalid_sweep():
    """Test a sweep value out of range is a configuration error."""
    assert main(['experiment', '--sweep-parameter', 'alpha', '--sweep-values', '1.5', '--trials', '1']) == 1


def test_worked_example_csv(capsys):
    """Test the worked example columns and the exact first pass."""
    assert main(['worked-example', '--trials', '500']) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == [
        'pass', 'photons_taken', 'stream_good', 'stream_bad',
        'stash_good', 'stash_bad', 'planned_snr', 'empirical_snr',
    ]
    assert rows[1][:4] == ['1', '20', '80', '20']
    assert rows[1][6] == 'inf'
    assert [row[1] for row in rows[1:]] == ['20', '25', '34']


def test_metrics_file_written(tmp_path, capsys):
    """Test --metrics-file dumps the session counters."""
    metrics = tmp_path / 'tsqc.prom'
    assert main(['run', '--metrics-file', str(metrics)]) == 0
    capsys.readouterr()
    text = metrics.read_text()
    assert 'tsqc_sessions_total{attack="no"} 1.0' in text
