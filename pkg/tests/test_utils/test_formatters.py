"""Tests for output formatting."""

import json

import numpy as np
import pytest
import yaml

from kakeyalab.utils.formatters import format_output, json_default, print_check, print_error, print_success


def test_json_handles_numpy():
    data = {"ratio": np.float64(1.5), "kept": np.array([1, 2]), "passed": np.bool_(True)}
    assert json.loads(format_output(data, "json")) == {"ratio": 1.5, "kept": [1, 2], "passed": True}


def test_json_default_rejects_other_objects():
    with pytest.raises(TypeError):
        json_default(object())


def test_yaml_output():
    text = format_output({"delta": 0.125, "kinds": ["bush", "sticky"]}, "yaml")
    assert yaml.safe_load(text) == {"delta": 0.125, "kinds": ["bush", "sticky"]}


def test_plain_output():
    assert format_output({"kept": 3, "covers": 1}, "plain") == "kept: 3\ncovers: 1"
    assert format_output(["a", "b"], "plain") == "a\nb"
    assert format_output(7, "plain") == "7"


def test_unknown_format():
    with pytest.raises(ValueError):
        format_output({}, "xml")


def test_print_helpers(capsys):
    print_check("wolff", "passed", "katz_tao: lhs=1 rhs=2")
    print_check("cordoba", "skipped")
    print_error("Bad delta", "Use a power of two")
    print_success("Done")
    out = capsys.readouterr().out
    assert "wolff: passed" in out
    assert "katz_tao: lhs=1 rhs=2" in out
    assert "? cordoba: skipped" in out
    assert "Error: Bad delta" in out
    assert "Suggestion: Use a power of two" in out
    assert "Done" in out
