"""Tests for input validators."""

import math

import pytest

from kakeyalab.utils.validators import parse_deltas, validate_delta, validate_keypath, validate_lambda


@pytest.mark.parametrize("delta", [2.0**-12, 2.0**-3, 0.01, "0.05"])
def test_valid_delta(delta):
    assert validate_delta(delta)


@pytest.mark.parametrize("delta", [0.5, 2.0**-13, 0.0, -0.1, math.nan, math.inf, "wide", None])
def test_invalid_delta(delta):
    assert not validate_delta(delta)


def test_validate_lambda():
    assert validate_lambda(1.0)
    assert validate_lambda(0.25)
    assert not validate_lambda(0.0)
    assert not validate_lambda(1.5)
    assert not validate_lambda("dense")


class TestParseDeltas:
    """Tests for comma-separated delta lists."""

    def test_powers_of_two(self):
        assert parse_deltas("2^-4,2^-6,2^-5") == [0.0625, 0.03125, 0.015625]

    def test_mixed_and_duplicates(self):
        assert parse_deltas("0.01, 2^-4, 0.01,") == [0.0625, 0.01]

    @pytest.mark.parametrize("text", ["", None, ",", "2^-2", "2^-4,abc", "2^x"])
    def test_invalid(self, text):
        assert parse_deltas(text) is None


@pytest.mark.parametrize("keypath", ["volumes", "volumes.kappa", "slab_factoring.max_groups", "broadness.K"])
def test_valid_keypath(keypath):
    assert validate_keypath(keypath)


@pytest.mark.parametrize("keypath", ["", ".kappa", "volumes.", "volumes..kappa", "1volumes", "volumes.kap-pa", None])
def test_invalid_keypath(keypath):
    assert not validate_keypath(keypath)
