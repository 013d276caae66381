"""Tests for report command."""

from unittest.mock import patch

import pandas as pd
import pytest

from kakeyalab.cli import cli


@pytest.fixture
def report_file(tmp_path):
    path = tmp_path / "sample.report.json"
    path.write_text("{}")
    return path


@pytest.fixture
def query_result():
    return {
        "status": "success",
        "name": "sample",
        "seed": 5,
        "exit_code": 2,
        "sections": [{"name": "wolff", "status": "passed"}, {"name": "cordoba", "status": "failed"}],
        "rows": pd.DataFrame([{"section": "cordoba", "name": "cordoba", "ratio": 0.5}]),
    }


def test_report_table(cli_runner, report_file, query_result):
    """Test the default table output."""
    with patch("kakeyalab.commands.report.query_report") as mock_query:
        mock_query.return_value = query_result

        result = cli_runner.invoke(cli, ["report", "-r", str(report_file)])
        assert result.exit_code == 0
        assert "sample (seed 5, exit code 2)" in result.output
        assert "cordoba: failed" in result.output
        mock_query.assert_called_once_with(report_file, None)


def test_report_where_csv(cli_runner, report_file, query_result):
    with patch("kakeyalab.commands.report.query_report") as mock_query:
        mock_query.return_value = query_result

        result = cli_runner.invoke(cli, ["report", "-r", str(report_file), "--where", "ratio < 1", "-f", "csv"])
        assert result.exit_code == 0
        assert result.output.splitlines()[0] == "section,name,ratio"
        assert mock_query.call_args[0][1] == "ratio < 1"


def test_report_json(cli_runner, report_file, query_result):
    with patch("kakeyalab.commands.report.query_report") as mock_query:
        mock_query.return_value = query_result

        result = cli_runner.invoke(cli, ["report", "-r", str(report_file), "-f", "json"])
        assert result.exit_code == 0
        assert '"ratio": 0.5' in result.output


def test_report_invalid_filter(cli_runner, report_file):
    with patch("kakeyalab.commands.report.query_report") as mock_query:
        mock_query.return_value = {"status": "error", "message": "Invalid row filter", "exit_code": 3}

        result = cli_runner.invoke(cli, ["report", "-r", str(report_file), "-w", "ratio <<< 1"])
        assert result.exit_code == 3
        assert "Invalid row filter" in result.output
