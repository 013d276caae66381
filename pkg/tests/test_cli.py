"""Tests for CLI main entry point."""

import os
from unittest.mock import patch

from kakeyalab.cli import cli


def test_cli_version(cli_runner):
    """Test version command."""
    result = cli_runner.invoke(cli, ["version"])
    assert result.exit_code == 0
    assert "kakeyalab version" in result.output


def test_cli_help(cli_runner):
    """Test help output."""
    result = cli_runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    assert "kakeyalab - finite-scale experiments" in result.output
    for command in ("generate", "analyze", "factor", "verify", "report", "sweep", "config"):
        assert command in result.output


def test_cli_config_command(cli_runner):
    """Test config command without, then with, a settings file."""
    with cli_runner.isolated_filesystem():
        result = cli_runner.invoke(cli, ["config"])
        assert result.exit_code == 1
        assert "No settings.toml found" in result.output

        result = cli_runner.invoke(cli, ["config", "--init"])
        assert result.exit_code == 0
        assert "Created default settings.toml" in result.output
        assert os.path.exists("settings.toml")

        result = cli_runner.invoke(cli, ["config"])
        assert result.exit_code == 0
        assert "Found configuration file" in result.output


def test_cli_config_get(cli_runner):
    """Test querying one setting."""
    with patch("kakeyalab.config.get_config_value") as mock_get:
        mock_get.return_value = 0.01
        result = cli_runner.invoke(cli, ["config", "--get", "volumes.kappa"])
        assert result.exit_code == 0
        assert "0.01" in result.output
        mock_get.assert_called_once_with("volumes.kappa")


def test_cli_config_get_missing(cli_runner):
    with patch("kakeyalab.config.get_config_value") as mock_get:
        mock_get.return_value = None
        result = cli_runner.invoke(cli, ["config", "--get", "volumes.nothing"])
        assert result.exit_code == 3


def test_cli_config_invalid_keypath(cli_runner):
    result = cli_runner.invoke(cli, ["config", "--get", "volumes..kappa"])
    assert result.exit_code == 3
    assert "Invalid keypath" in result.output


def test_cli_config_lists_analyses(cli_runner):
    result = cli_runner.invoke(cli, ["config", "--analyses"])
    assert result.exit_code == 0
    lines = result.output.split()
    assert "wolff" in lines
    assert "cordoba" in lines
    assert lines == sorted(lines)


def test_cli_with_custom_config(cli_runner, temp_config_file):
    """Test CLI with custom config file."""
    result = cli_runner.invoke(cli, ["--config", temp_config_file, "version"])
    assert result.exit_code == 0


def test_cli_with_environment(cli_runner):
    """Test CLI with environment option."""
    result = cli_runner.invoke(cli, ["--env", "production", "version"])
    assert result.exit_code == 0


def test_cli_verbose_mode(cli_runner):
    """Test CLI with verbose mode."""
    result = cli_runner.invoke(cli, ["--verbose", "version"])
    assert result.exit_code == 0


def test_cli_rejects_zero_threads(cli_runner):
    result = cli_runner.invoke(cli, ["--threads", "0", "version"])
    assert result.exit_code == 2
