"""Output formatting utilities."""

import json
from typing import Any, Dict, Optional

import numpy as np
import yaml
from colorama import Fore, Style, init

# Initialize colorama
init(autoreset=True)


def json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def format_output(data: Any, format_type: str = "plain") -> str:
    """Format output data in various formats.

    Args:
        data: Data to format
        format_type: Output format (json, yaml, plain)

    Returns:
        Formatted string
    """
    if format_type == "json":
        return json.dumps(data, indent=2, ensure_ascii=False, default=json_default)

    elif format_type == "yaml":
        plain = json.loads(json.dumps(data, default=json_default))
        return yaml.safe_dump(plain, default_flow_style=False, allow_unicode=True, sort_keys=False)

    elif format_type == "plain":
        if isinstance(data, dict):
            return "\n".join(f"{key}: {value}" for key, value in data.items())
        if isinstance(data, list):
            return "\n".join(str(item) for item in data)
        return str(data)

    else:
        raise ValueError(f"Unknown format: {format_type}. Available: ['json', 'yaml', 'plain']")


def print_config(config: Dict[str, Any], keypath: Optional[str] = None) -> None:
    """Print configuration in a formatted way.

    Args:
        config: Configuration dictionary or value
        keypath: Optional keypath that was queried
    """
    title = f"Configuration: {keypath}" if keypath else "kakeyalab configuration"
    print(f"{Fore.CYAN}{title}{Style.RESET_ALL}")
    print("-" * len(title))
    if isinstance(config, dict):
        print(format_output(config, "json"))
    else:
        print(str(config))


def print_check(name: str, status: str, detail: Optional[str] = None) -> None:
    """Print one analysis line: green pass, red fail or error, cyan report-only.

    Args:
        name: Analysis or inequality name
        status: One of passed, failed, error, reported
        detail: Optional trailing text
    """
    marks = {
        "passed": (Fore.GREEN, "✓"),
        "failed": (Fore.RED, "✗"),
        "error": (Fore.RED, "!"),
        "reported": (Fore.CYAN, "·"),
    }
    color, mark = marks.get(status, (Fore.YELLOW, "?"))
    line = f"{color}{mark} {name}: {status}{Style.RESET_ALL}"
    print(f"{line}  {detail}" if detail else line)


def print_error(message: str, suggestion: Optional[str] = None) -> None:
    """Print an error message with optional suggestion.

    Args:
        message: Error message
        suggestion: Optional suggestion for fixing the error
    """
    print(f"{Fore.RED}Error: {message}{Style.RESET_ALL}")
    if suggestion:
        print(f"{Fore.YELLOW}Suggestion: {suggestion}{Style.RESET_ALL}")


def print_success(message: str) -> None:
    print(f"{Fore.GREEN}✓ {message}{Style.RESET_ALL}")
