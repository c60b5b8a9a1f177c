import json

import pytest
from click.testing import CliRunner

from config import TestingConfig
from run import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, cli

QUIET = """\
processors: [1, 2, 3]
seed: 5
step_budget: 400
layers: [recsa]
checkers: [occupancy, no-fabrication, closure]
"""

LATE_JOIN = """\
processors: [1, 2, 3]
step_budget: 50
layers: [recsa, joining]
events:
  - at: 49
    join: 3
checkers: [join-completion]
"""

UNDECLARED = """\
processors: [1, 2, 3]
events:
  - at: 10
    crash: 7
"""


@pytest.fixture
def runner(tmp_path, monkeypatch):
    monkeypatch.setattr(TestingConfig, 'SQLALCHEMY_DATABASE_URI', f"sqlite:///{tmp_path / 'runs.db'}")
    return CliRunner()


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_passing_run(runner, tmp_path):
    path = write(tmp_path, 'quiet.yaml', QUIET)
    trace_path = tmp_path / 'trace.tsv'
    result = runner.invoke(cli, ['--config', 'testing', 'run', path, '--trace', str(trace_path)])
    assert result.exit_code == EXIT_PASS, result.output
    assert '✅ closure' in result.output
    assert trace_path.read_text().startswith('1\t')


def test_failing_run_prints_witness(runner, tmp_path):
    path = write(tmp_path, 'late.yaml', LATE_JOIN)
    result = runner.invoke(cli, ['--config', 'testing', 'run', path])
    assert result.exit_code == EXIT_FAIL
    assert '❌ join-completion' in result.output
    assert 'witness: step 50 budget' in result.output


def test_undeclared_node_is_a_usage_error(runner, tmp_path):
    path = write(tmp_path, 'bad.yaml', UNDECLARED)
    result = runner.invoke(cli, ['--config', 'testing', 'run', path])
    assert result.exit_code == EXIT_USAGE
    assert 'line 3' in result.output
    assert 'not declared' in result.output


def test_unknown_scenario_and_checker(runner, tmp_path):
    result = runner.invoke(cli, ['--config', 'testing', 'run', 'no-such-scenario'])
    assert result.exit_code == EXIT_USAGE
    path = write(tmp_path, 'quiet.yaml', QUIET)
    result = runner.invoke(cli, ['--config', 'testing', 'run', path, '--checkers', 'telepathy'])
    assert result.exit_code == EXIT_USAGE


def test_unknown_profile(runner):
    result = runner.invoke(cli, ['--config', 'staging', 'scenarios'])
    assert result.exit_code == EXIT_USAGE


def test_json_report_and_replay(runner, tmp_path):
    path = write(tmp_path, 'quiet.yaml', QUIET)
    result = runner.invoke(cli, ['--config', 'testing', 'run', path, '--json', '--replay', '--seed', '9'])
    assert result.exit_code == EXIT_PASS, result.output
    report = json.loads(result.output)
    assert report['seed'] == 9
    assert {v['name'] for v in report['verdicts']} == {'occupancy', 'no-fabrication', 'closure', 'determinism'}


def test_history_lists_recorded_runs(runner, tmp_path):
    path = write(tmp_path, 'quiet.yaml', QUIET)
    runner.invoke(cli, ['--config', 'testing', 'run', path])
    result = runner.invoke(cli, ['--config', 'testing', 'history'])
    assert result.exit_code == 0
    assert 'quiet#5' in result.output


def test_bundled_scenarios_listed(runner):
    result = runner.invoke(cli, ['--config', 'testing', 'scenarios'])
    assert result.exit_code == 0
    assert 'brute-force-recovery' in result.output
    assert 'vs' in result.output
