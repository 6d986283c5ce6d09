"""
Entry point for running superstat as a module.

This allows the package to be run with: python -m superstat
"""

from .cli import main

if __name__ == "__main__":
    main()
