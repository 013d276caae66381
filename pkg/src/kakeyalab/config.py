"""Configuration management using Dynaconf."""

from pathlib import Path
from typing import Any, Dict, Optional

from dynaconf import Dynaconf

BASE_DIR = Path(__file__).parent.parent.parent

settings = Dynaconf(
    envvar_prefix="KAKEYALAB",
    settings_files=[
        "settings.toml",
        ".secrets.toml",
    ],
    environments=True,
    load_dotenv=True,
    merge_enabled=True,
    root_path=BASE_DIR,
)


def get_config_value(keypath: Optional[str] = None) -> Any:
    """Get configuration value by keypath.

    Args:
        keypath: Dot-separated path to config value (e.g., "volumes.kappa")

    Returns:
        Configuration value or entire config if keypath is None
    """
    if keypath:
        try:
            value = settings
            for key in keypath.split("."):
                if hasattr(value, key):
                    value = getattr(value, key)
                else:
                    value = value.get(key)
            return value
        except (AttributeError, KeyError, TypeError):
            return None
    return settings.to_dict()


def _section(name: str) -> Dict[str, Any]:
    value = settings.get(name) or {}
    return {str(k).lower(): v for k, v in dict(value).items()}


def get_geometry_config() -> dict:
    """Containment slack and grid resolution."""
    return {
        "slack": float(settings.get("geometry.slack", 0.01)),
        "cells_per_delta": float(settings.get("geometry.cells_per_delta", 4.0)),
    }


def get_wolff_config() -> dict:
    return _section("wolff")


def get_factoring_config() -> dict:
    """Convex and slab factoring calibrations.

    Returns:
        Dict with "factoring", "slab_factoring" and "rigid" sections
    """
    return {
        "factoring": _section("factoring"),
        "slab_factoring": _section("slab_factoring"),
        "rigid": _section("rigid"),
    }


def get_broadness_config() -> dict:
    return {
        "beta": float(settings.get("broadness.beta", 0.05)),
        "K": float(settings.get("broadness.K", 100.0)),
        "certificate_floor": float(settings.get("broadness.certificate_floor", 1.0)),
    }


def get_volume_config() -> dict:
    return _section("volumes")


def get_analysis_options() -> Dict[str, dict]:
    """All calibration sections, keyed by section name, as analyses expect them."""
    factoring = get_factoring_config()
    return {
        "geometry": get_geometry_config(),
        "wolff": get_wolff_config(),
        "factoring": factoring["factoring"],
        "slab_factoring": factoring["slab_factoring"],
        "rigid": factoring["rigid"],
        "broadness": get_broadness_config(),
        "volumes": get_volume_config(),
    }
