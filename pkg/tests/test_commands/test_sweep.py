"""Tests for sweep command."""

from unittest.mock import patch

from kakeyalab.cli import cli

ROWS = [{"delta": 0.0625, "ratio": 1.1}, {"delta": 0.03125, "ratio": 1.3}]


def test_sweep_parses_deltas(cli_runner, experiment_file):
    """Test sweep passes parsed deltas, coarse first."""
    with patch("kakeyalab.commands.sweep.sweep_config") as mock_sweep:
        mock_sweep.return_value = {"status": "success", "rows": ROWS, "monotone": True, "paths": []}

        result = cli_runner.invoke(
            cli, ["sweep", "-C", str(experiment_file), "-a", "doubling", "--deltas", "2^-5,2^-4"]
        )
        assert result.exit_code == 0
        assert "delta=0.0625  ratio=1.1" in result.output
        assert mock_sweep.call_args[0][2] == [0.0625, 0.03125]


def test_sweep_invalid_deltas(cli_runner, experiment_file):
    result = cli_runner.invoke(cli, ["sweep", "-C", str(experiment_file), "-a", "doubling", "-d", "0.5"])
    assert result.exit_code == 3
    assert "Invalid delta list" in result.output


def test_sweep_require_monotone(cli_runner, experiment_file):
    """Test --require-monotone turns a non-increasing series into exit code 2."""
    with patch("kakeyalab.commands.sweep.sweep_config") as mock_sweep:
        mock_sweep.return_value = {"status": "success", "rows": ROWS[::-1], "monotone": False, "paths": []}

        relaxed = cli_runner.invoke(cli, ["sweep", "-C", str(experiment_file), "-a", "doubling"])
        strict = cli_runner.invoke(cli, ["sweep", "-C", str(experiment_file), "-a", "doubling", "--require-monotone"])
        assert relaxed.exit_code == 0
        assert strict.exit_code == 2


def test_sweep_error(cli_runner, experiment_file):
    with patch("kakeyalab.commands.sweep.sweep_config") as mock_sweep:
        mock_sweep.return_value = {"status": "error", "message": "Analysis 'x' is not in the config", "exit_code": 3}

        result = cli_runner.invoke(cli, ["sweep", "-C", str(experiment_file), "-a", "x"])
        assert result.exit_code == 3
