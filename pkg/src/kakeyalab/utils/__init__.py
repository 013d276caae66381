"""Logging, output formatting, validation and report files."""
