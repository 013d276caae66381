"""Tests for factor command."""

from unittest.mock import patch

from kakeyalab.cli import cli


def test_factor_convex(cli_runner, tmp_path):
    """Test factor prints the summary."""
    family = tmp_path / "family.json"
    family.write_text("{}")
    with patch("kakeyalab.commands.factor.factor_file") as mock_factor:
        mock_factor.return_value = {"status": "success", "mode": "convex", "summary": {"kept": 12, "covers": 3}}

        result = cli_runner.invoke(cli, ["factor", "--family", str(family)])
        assert result.exit_code == 0
        assert "kept: 12" in result.output
        family_path, mode, options, output = mock_factor.call_args[0]
        assert mode == "convex"
        assert output is None
        assert "factoring" in options


def test_factor_slab_to_file(cli_runner, tmp_path):
    family = tmp_path / "family.json"
    family.write_text("{}")
    with patch("kakeyalab.commands.factor.factor_file") as mock_factor:
        mock_factor.return_value = {"status": "success", "mode": "slab", "summary": {"groups": 2}}

        result = cli_runner.invoke(
            cli, ["factor", "-F", str(family), "--mode", "slab", "-o", str(tmp_path / "out.json"), "-f", "json"]
        )
        assert result.exit_code == 0
        assert '"groups": 2' in result.output
        assert mock_factor.call_args[0][1] == "slab"


def test_factor_verification_error(cli_runner, tmp_path):
    """Test factor propagates the exit code of a failed conclusion."""
    family = tmp_path / "family.json"
    family.write_text("{}")
    with patch("kakeyalab.commands.factor.factor_file") as mock_factor:
        mock_factor.return_value = {
            "status": "error",
            "message": "Conclusion ii_balance needs K=2.1e4 above cap 1e4",
            "suggestion": "Raise factoring.k_cap",
            "exit_code": 2,
        }

        result = cli_runner.invoke(cli, ["factor", "-F", str(family)])
        assert result.exit_code == 2
        assert "Raise factoring.k_cap" in result.output


def test_factor_rejects_unknown_mode(cli_runner, tmp_path):
    family = tmp_path / "family.json"
    family.write_text("{}")
    result = cli_runner.invoke(cli, ["factor", "-F", str(family), "--mode", "spectral"])
    assert result.exit_code == 2
