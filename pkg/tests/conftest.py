"""Pytest configuration and fixtures."""

import json
import os
import tempfile
from unittest.mock import patch

import pytest
from click.testing import CliRunner

from kakeyalab.analyses.base import AnalysisResult
from kakeyalab.core.experiment import ReportBundle


@pytest.fixture
def cli_runner():
    """Create a Click CLI runner for testing."""
    return CliRunner()


@pytest.fixture
def temp_config_file():
    """Create a temporary settings file."""
    with tempfile.NamedTemporaryFile(mode="w", suffix=".toml", delete=False) as f:
        f.write(
            """
[default]
log_level = "DEBUG"
output_format = "json"

[default.volumes]
kappa = 0.02
        """
        )
        temp_path = f.name

    yield temp_path

    os.unlink(temp_path)


@pytest.fixture
def mock_settings():
    """Mock dynaconf settings."""
    with patch("kakeyalab.config.settings") as mock:
        mock.get.side_effect = lambda key, default=None: default
        mock.to_dict.return_value = {"log_level": "INFO", "volumes": {"kappa": 0.01}}
        yield mock


@pytest.fixture
def experiment_file(tmp_path):
    """A small experiment config that runs in well under a second."""
    path = tmp_path / "small.json"
    path.write_text(
        json.dumps(
            {
                "name": "small",
                "seed": 1,
                "family": {"kind": "random", "delta": 0.125, "seed": 1, "params": {"count": 4}},
                "shading": {"mode": "full", "cells_per_delta": 2.0},
                "analyses": [{"name": "union_volume"}],
                "output": {"directory": str(tmp_path / "reports")},
            }
        )
    )
    return path


@pytest.fixture
def sample_bundle():
    """Bundle with one passing, one failing and one report-only section."""
    return ReportBundle(
        name="sample",
        seed=5,
        sections=[
            AnalysisResult("wolff", True, rows=[{"name": "katz_tao", "delta": 0.125, "lhs": 1.0, "rhs": 2.0, "ratio": 0.5}]),
            AnalysisResult("cordoba", False, rows=[{"name": "cordoba", "delta": 0.125, "lhs": 0.5, "rhs": 1.0, "ratio": 0.5}]),
            AnalysisResult("union_volume", None),
        ],
        created="2024-01-01T00:00:00+00:00",
    )
