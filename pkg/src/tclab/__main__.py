"""Allow running with `python -m tclab`."""

from .runner import main

main()
