"""Geometry, constants, factoring, broadness, volumes and experiments."""
