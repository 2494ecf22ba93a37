"""Complex tridiagonal operators, direct solves and smallest singular values."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, GridError, SingularMatrixError
from .grid import UNIT, Grid, GridFunction, WeightSpec

logger = logging.getLogger(__name__)

PIVOT_FLOOR = 1e-300
RESIDUAL_FACTOR = 1e-10
DEFAULT_SEED = 20240607  # seed of every start block used by inverse iteration


def _as_complex(values, length: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    if arr.shape != (length,):
        raise GridError(f"{name} must have length {length}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Matrix with ``lower[i] = A[i+1, i]``, ``diag[i] = A[i, i]``, ``upper[i] = A[i, i+1]``.

    Rows act on interior nodes; Dirichlet boundary values are implicitly zero.
    """

    grid: Grid
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n_interior
        object.__setattr__(self, "diag", _as_complex(self.diag, n, "diag"))
        object.__setattr__(self, "lower", _as_complex(self.lower, n - 1, "lower"))
        object.__setattr__(self, "upper", _as_complex(self.upper, n - 1, "upper"))

    @classmethod
    def identity(cls, grid: Grid, scale: complex = 1.0) -> TridiagonalOperator:
        n = grid.n_interior
        return cls(grid, np.zeros(n - 1), np.full(n, scale), np.zeros(n - 1))

    @property
    def n(self) -> int:
        return self.grid.n_interior

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] += self.lower * x[:-1]
        y[:-1] += self.upper * x[1:]
        return y

    def apply(self, f: GridFunction) -> GridFunction:
        if f.grid != self.grid:
            raise GridError(f"grid mismatch: operator on {self.grid}, function on {f.grid}")
        return f.map(self.matvec(f.values))

    def _check(self, other: TridiagonalOperator) -> None:
        if other.grid != self.grid:
            raise GridError("operators live on different grids")

    def __add__(self, other: TridiagonalOperator) -> TridiagonalOperator:
        self._check(other)
        return TridiagonalOperator(
            self.grid,
            self.lower + other.lower,
            self.diag + other.diag,
            self.upper + other.upper,
        )

    def __sub__(self, other: TridiagonalOperator) -> TridiagonalOperator:
        return self + other * -1.0

    def __mul__(self, scalar: complex) -> TridiagonalOperator:
        return TridiagonalOperator(
            self.grid, self.lower * scalar, self.diag * scalar, self.upper * scalar
        )

    __rmul__ = __mul__

    def shifted(self, z: complex) -> TridiagonalOperator:
        """``A + z I``."""
        return TridiagonalOperator(self.grid, self.lower, self.diag + z, self.upper)

    def scale_rows(self, d: np.ndarray) -> TridiagonalOperator:
        """``D A`` for the diagonal matrix ``D = diag(d)``."""
        return TridiagonalOperator(
            self.grid, self.lower * d[1:], self.diag * d, self.upper * d[:-1]
        )

    def scale_cols(self, d: np.ndarray) -> TridiagonalOperator:
        """``A D`` for the diagonal matrix ``D = diag(d)``."""
        return TridiagonalOperator(
            self.grid, self.lower * d[:-1], self.diag * d, self.upper * d[1:]
        )

    def norm_inf(self) -> float:
        rows = np.abs(self.diag)
        rows[1:] += np.abs(self.lower)
        rows[:-1] += np.abs(self.upper)
        return float(np.max(rows))

    def to_sparse(self) -> sp.csc_matrix:
        return sp.diags(
            [self.lower, self.diag, self.upper], [-1, 0, 1], format="csc", dtype=complex
        )

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def factorize(self) -> Factorization:
        return Factorization(self)


class Factorization:
    """Sparse LU of a tridiagonal operator, reused across many right-hand sides."""

    def __init__(self, op: TridiagonalOperator) -> None:
        self.op = op
        try:
            self._lu = splu(op.to_sparse())
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc), _first_small_pivot(op)) from exc

    def solve(self, rhs: np.ndarray, trans: str = "N") -> np.ndarray:
        x = self._lu.solve(np.asarray(rhs, dtype=complex), trans=trans)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("non-finite solution", _first_small_pivot(self.op))
        return x


def _thomas_factor(
    op: TridiagonalOperator,
) -> tuple[list[complex], list[complex]] | int:
    """LU without pivoting; returns (multipliers, pivots) or the failing pivot index."""
    lower = op.lower.tolist()
    diag = op.diag.tolist()
    upper = op.upper.tolist()
    pivot = diag[0]
    pivots = [pivot]
    mults: list[complex] = []
    for i in range(1, op.n):
        if abs(pivot) < PIVOT_FLOOR:
            return i - 1
        m = lower[i - 1] / pivot
        pivot = diag[i] - m * upper[i - 1]
        mults.append(m)
        pivots.append(pivot)
    if abs(pivot) < PIVOT_FLOOR:
        return op.n - 1
    return mults, pivots


def _first_small_pivot(op: TridiagonalOperator) -> int:
    factors = _thomas_factor(op)
    return factors if isinstance(factors, int) else -1


def _thomas_solve(
    op: TridiagonalOperator, mults: list[complex], pivots: list[complex], rhs: np.ndarray
) -> np.ndarray:
    upper = op.upper.tolist()
    y = rhs.tolist()
    for i in range(1, op.n):
        y[i] -= mults[i - 1] * y[i - 1]
    x = [0j] * op.n
    x[-1] = y[-1] / pivots[-1]
    for i in range(op.n - 2, -1, -1):
        x[i] = (y[i] - upper[i] * x[i + 1]) / pivots[i]
    return np.array(x, dtype=complex)


def _banded_solve(op: TridiagonalOperator, rhs: np.ndarray, pivot_index: int) -> np.ndarray:
    ab = np.zeros((3, op.n), dtype=complex)
    ab[0, 1:] = op.upper
    ab[1] = op.diag
    ab[2, :-1] = op.lower
    try:
        x = scipy.linalg.solve_banded((1, 1), ab, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularMatrixError("singular tridiagonal matrix", pivot_index) from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("singular tridiagonal matrix", pivot_index)
    return x


def relative_residual(op: TridiagonalOperator, x: np.ndarray, rhs: np.ndarray) -> float:
    """``|op x - rhs| / (|op| |x| + |rhs|)`` in the max norm; 0 for a zero system."""
    res = np.max(np.abs(op.matvec(x) - rhs), initial=0.0)
    scale = op.norm_inf() * np.max(np.abs(x), initial=0.0) + np.max(
        np.abs(rhs), initial=0.0
    )
    return float(res / scale) if scale > 0 else float(res)


def solve_tridiagonal(op: TridiagonalOperator, rhs: GridFunction) -> GridFunction:
    """Solve ``op x = rhs``: Thomas LU plus one refinement step.

    Falls back to LAPACK's partially pivoted banded solver when a pivot is tiny.
    Raises :class:`ConvergenceError` when the refined residual stays above
    ``RESIDUAL_FACTOR``.
    """
    if rhs.grid != op.grid:
        raise GridError("right-hand side lives on a different grid")
    b = rhs.values
    factors = _thomas_factor(op)
    if isinstance(factors, int):
        logger.warning("tiny pivot at row %d, switching to partial pivoting", factors)
        x = _banded_solve(op, b, factors)
        x = x + _banded_solve(op, b - op.matvec(x), factors)
    else:
        mults, pivots = factors
        x = _thomas_solve(op, mults, pivots, b)
        x = x + _thomas_solve(op, mults, pivots, b - op.matvec(x))
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("solution overflowed", _first_small_pivot(op))
    residual = relative_residual(op, x, b)
    if not residual <= RESIDUAL_FACTOR:
        raise ConvergenceError("tridiagonal residual above tolerance after refinement", 1, residual)
    return rhs.map(x)


def weighted_matrix(
    op: TridiagonalOperator, w_in: WeightSpec, w_out: WeightSpec
) -> TridiagonalOperator:
    """``W_out^{1/2} A W_in^{-1/2}``: its singular values are the weighted ones."""
    root_out = np.sqrt(w_out.sample(op.grid))
    root_in = np.sqrt(w_in.sample(op.grid))
    return op.scale_rows(root_out).scale_cols(1.0 / root_in)


def smallest_singular_value(
    op: TridiagonalOperator,
    w_in: WeightSpec = UNIT,
    w_out: WeightSpec = UNIT,
    *,
    tol: float = 1e-8,
    max_iter: int = 500,
    block: int = 4,
    seed: int = DEFAULT_SEED,
    lam: float | None = None,
) -> float:
    """min ``||A x||_{w_out}`` over ``||x||_{w_in} = 1``.

    Block inverse iteration on the normal operator of the weighted matrix with a
    Rayleigh-Ritz step; returns 0 for a singular operator.
    """
    m = weighted_matrix(op, w_in, w_out)
    try:
        lu = m.factorize()
    except SingularMatrixError:
        return 0.0
    mat = m.to_sparse()
    mat_h = mat.conj().T.tocsc()
    rng = np.random.default_rng(seed)
    b = min(block, m.n)
    v = rng.standard_normal((m.n, b)) + 1j * rng.standard_normal((m.n, b))
    v, _ = np.linalg.qr(v)
    prev = math.inf
    sigma = math.inf
    for it in range(1, max_iter + 1):
        try:
            z = lu.solve(lu.solve(v, trans="H"))
        except SingularMatrixError:
            return 0.0
        v, _ = np.linalg.qr(z)
        mv = mat @ v
        gram = mv.conj().T @ mv
        evals, evecs = np.linalg.eigh((gram + gram.conj().T) / 2)
        v = v @ evecs
        theta = max(float(evals[0]), 0.0)
        sigma = math.sqrt(theta)
        if theta == 0.0:
            return 0.0
        v1 = v[:, 0]
        resid = np.linalg.norm(mat_h @ (mat @ v1) - theta * v1) / theta
        logger.debug("sigma_min iteration %d: %.12g (residual %.2e)", it, sigma, resid)
        if resid <= tol or abs(sigma - prev) <= 1e-2 * tol * sigma:
            return sigma
        prev = sigma
    raise ConvergenceError(
        "smallest singular value did not converge",
        max_iter,
        abs(sigma - prev) / sigma if sigma else math.inf,
        lam,
    )
