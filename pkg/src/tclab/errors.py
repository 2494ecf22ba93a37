"""Exception hierarchy shared by every tclab module."""

from __future__ import annotations


class TclabError(Exception):
    """Base class for all tclab failures."""


class GridError(TclabError, ValueError):
    """Invalid grid construction or mismatched grids."""


class SingularMatrixError(TclabError):
    """A tridiagonal system could not be solved."""

    def __init__(self, message: str, pivot_index: int) -> None:
        super().__init__(f"{message} (pivot {pivot_index})")
        self.pivot_index = pivot_index


class ConvergenceError(TclabError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(
        self, message: str, iterations: int, gap: float, lam: float | None = None
    ) -> None:
        where = "" if lam is None else f" at lambda={lam:.6g}"
        super().__init__(f"{message}{where}: {iterations} iterations, gap {gap:.3e}")
        self.iterations = iterations
        self.gap = gap
        self.lam = lam


class HypothesisError(TclabError, ValueError):
    """A mathematical precondition of an audit does not hold."""


class SolverError(TclabError):
    """A time step of an evolution failed."""

    def __init__(self, message: str, step: int) -> None:
        super().__init__(f"step {step}: {message}")
        self.step = step


class NonDecayError(TclabError):
    """The local boundary problem did not decay at the Poincare rate."""


class ConfigError(TclabError, ValueError):
    """Invalid experiment configuration; ``field`` names the culprit."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
