"""Tests for analyze command."""

from unittest.mock import patch

from kakeyalab.cli import cli


def _success(bundle):
    return {
        "status": "success",
        "bundle": bundle,
        "paths": ["reports/sample.report.json"],
        "exit_code": bundle.exit_code,
        "failures": bundle.failures(),
    }


def test_analyze_reports_failures(cli_runner, experiment_file, sample_bundle):
    """Test analyze exits 2 when a gated section fails."""
    with patch("kakeyalab.commands.analyze.analyze_config") as mock_analyze:
        mock_analyze.return_value = _success(sample_bundle)

        result = cli_runner.invoke(cli, ["analyze", "--config", str(experiment_file)])
        assert result.exit_code == 2
        assert "wolff: passed" in result.output
        assert "cordoba: failed" in result.output
        assert "union_volume: reported" in result.output
        assert "Failed: cordoba" in result.output


def test_analyze_passes_overrides(cli_runner, experiment_file, sample_bundle, tmp_path):
    sample_bundle.sections = sample_bundle.sections[:1]
    with patch("kakeyalab.commands.analyze.analyze_config") as mock_analyze:
        mock_analyze.return_value = _success(sample_bundle)

        result = cli_runner.invoke(
            cli, ["--threads", "3", "analyze", "-C", str(experiment_file), "--seed", "9", "-o", str(tmp_path)]
        )
        assert result.exit_code == 0
        assert "All gated analyses passed" in result.output
        config_path, options, seed, threads, output_dir = mock_analyze.call_args[0]
        assert config_path == experiment_file
        assert "volumes" in options
        assert (seed, threads, output_dir) == (9, 3, tmp_path)


def test_analyze_config_error(cli_runner, experiment_file):
    with patch("kakeyalab.commands.analyze.analyze_config") as mock_analyze:
        mock_analyze.return_value = {"status": "error", "message": "Invalid experiment config", "exit_code": 3}

        result = cli_runner.invoke(cli, ["analyze", "-C", str(experiment_file)])
        assert result.exit_code == 3
        assert "Invalid experiment config" in result.output


def test_analyze_missing_config_file(cli_runner, tmp_path):
    result = cli_runner.invoke(cli, ["analyze", "-C", str(tmp_path / "missing.json")])
    assert result.exit_code == 2


def test_analyze_end_to_end(cli_runner, experiment_file, tmp_path):
    """Test analyze on a real small config."""
    result = cli_runner.invoke(cli, ["analyze", "-C", str(experiment_file)])
    assert result.exit_code == 0
    assert (tmp_path / "reports" / "small.report.json").exists()
    assert (tmp_path / "reports" / "small.report.csv").exists()
