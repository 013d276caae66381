"""Command modules for the kakeyalab CLI."""
