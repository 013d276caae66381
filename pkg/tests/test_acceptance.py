"""Desk-scale reproductions from the shipped acceptance config."""

import json
from pathlib import Path

import pytest

from kakeyalab.config import get_analysis_options
from kakeyalab.core.experiment import as_config, run_experiment
from kakeyalab.core.pipeline import canonical_report

ACCEPTANCE = Path(__file__).parent.parent / "acceptance.json"

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def config():
    return as_config(json.loads(ACCEPTANCE.read_text()))


@pytest.fixture(scope="module")
def bundle(config):
    return run_experiment(config, get_analysis_options())


def test_config_is_valid(config):
    labels = [spec.section for spec in config.analyses]
    assert len(labels) == len(set(labels))


def test_every_gated_section_passes(bundle):
    assert bundle.failures() == []
    assert bundle.exit_code == 0


def test_same_seed_same_report(config, bundle):
    again = run_experiment(config, get_analysis_options())
    assert canonical_report(again.to_dict()) == canonical_report(bundle.to_dict())
