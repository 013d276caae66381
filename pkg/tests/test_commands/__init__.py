"""Test modules for commands."""