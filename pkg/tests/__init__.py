"""Test suite for MGAPI."""