"""Main entry point for `python -m kakeyalab`."""

from .cli import main

if __name__ == "__main__":
    main()
