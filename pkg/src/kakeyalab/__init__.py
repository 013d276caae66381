"""kakeyalab - finite-scale experiments on δ-tube arrangements, Wolff constants and volume estimates."""

__version__ = "0.1.0"
