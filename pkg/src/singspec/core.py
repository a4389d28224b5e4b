"""Grids, signals, linear operators, and Bregman distances.

Every function space in this package is discrete and carries a quadrature
weight: ``h = 1/n`` for meshes of cell averages on [0, 1], ``h^2`` on the
unit square, and ``1`` for plain coordinate vectors.  All inner products,
norms, and adjoints are taken with respect to that weight, so discrete
computations mirror their continuum counterparts without scale juggling.

Arrays are float64 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "SingspecError",
    "DimensionError",
    "InvalidSubgradientError",
    "ConvergenceError",
    "SearchError",
    "Grid1D",
    "Grid2D",
    "Coords",
    "Space",
    "Signal",
    "sample",
    "zeros",
    "LinearOperator",
    "Identity",
    "DenseMatrix",
    "SampledKernel",
    "inner",
    "norm",
    "k_inner",
    "BregmanRecord",
    "bregman_distance",
]


# ---------------------------------------------------------------- errors

class SingspecError(Exception):
    """Base class for package errors."""


class DimensionError(SingspecError):
    """Signal, operator, or regularizer domains do not match."""


class InvalidSubgradientError(SingspecError):
    """A vector offered as a subgradient failed its certificate test.

    Carries the failed ``certificate`` for inspection.
    """

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class ConvergenceError(SingspecError):
    """An iterative solver exhausted its budget.

    Carries the best iterate found so far as ``result``.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class SearchError(SingspecError):
    """A search routine failed to produce a certified answer.

    Carries the best candidate and a diagnostics dict.
    """

    def __init__(self, message: str, candidate=None, diagnostics=None):
        super().__init__(message)
        self.candidate = candidate
        self.diagnostics = dict(diagnostics or {})


# ---------------------------------------------------------------- spaces

@dataclass(frozen=True)
class Grid1D:
    """Uniform mesh of n cells on [0, 1], midpoint samples.

    Cell centers sit at (i + 1/2) h with h = 1/n; a Signal on this grid
    holds the n cell values and the quadrature weight is h.
    """

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DimensionError(f"Grid1D needs n >= 2, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def size(self) -> int:
        return self.n

    @property
    def weight(self) -> float:
        return self.h

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h


@dataclass(frozen=True)
class Grid2D:
    """Uniform n-by-n mesh on the unit square, midpoint samples.

    Signals are stored flattened in row-major order: entry i*n + j holds
    the value at (x_i, y_j) with x_i = (i + 1/2) h, y_j = (j + 1/2) h.
    The quadrature weight is h^2.
    """

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DimensionError(f"Grid2D needs n >= 2, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def size(self) -> int:
        return self.n * self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def weight(self) -> float:
        return self.h * self.h

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h


@dataclass(frozen=True)
class Coords:
    """Plain coordinate space of a given dimension, quadrature weight 1."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError(f"Coords needs dim >= 1, got {self.dim}")

    @property
    def size(self) -> int:
        return self.dim

    @property
    def weight(self) -> float:
        return 1.0


Space = Grid1D | Grid2D | Coords


# ---------------------------------------------------------------- signals

@dataclass(frozen=True)
class Signal:
    """A float64 vector attached to its space.

    ``values`` is stored read-only; build modified signals with
    ``with_values`` or by wrapping a fresh array.
    """

    space: Space
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.shape[0] != self.space.size:
            raise DimensionError(
                f"signal has {v.shape[0]} entries, space holds {self.space.size}"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray) -> "Signal":
        return Signal(self.space, values)

    def as_matrix(self) -> np.ndarray:
        """Row-major matrix view for 2D grids and matrix-shaped coords."""
        if isinstance(self.space, Grid2D):
            return self.values.reshape(self.space.shape)
        raise DimensionError("as_matrix needs a Grid2D signal")

    def __add__(self, other: "Signal") -> "Signal":
        _check_same_space(self, other)
        return Signal(self.space, self.values + other.values)

    def __sub__(self, other: "Signal") -> "Signal":
        _check_same_space(self, other)
        return Signal(self.space, self.values - other.values)

    def __mul__(self, c: float) -> "Signal":
        return Signal(self.space, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "Signal":
        return Signal(self.space, -self.values)


def _check_same_space(u: Signal, v: Signal) -> None:
    if u.space != v.space:
        raise DimensionError(f"spaces differ: {u.space} vs {v.space}")


def sample(grid: Grid1D, fn: Callable[[np.ndarray], np.ndarray]) -> Signal:
    """Sample a function of x at the cell centers of a 1D grid."""
    return Signal(grid, fn(grid.centers))


def zeros(space: Space) -> Signal:
    return Signal(space, np.zeros(space.size))


# ---------------------------------------------------------------- operators

class LinearOperator:
    """Base class: a linear map between two spaces with a true adjoint.

    ``adjoint`` is the Hilbert-space adjoint for the weighted inner
    products of the domain and range, so <Ku, v>_range == <u, K*v>_domain
    holds to rounding for every pair.
    """

    domain: Space
    range_: Space

    def apply(self, u: Signal) -> Signal:
        raise NotImplementedError

    def adjoint(self, v: Signal) -> Signal:
        raise NotImplementedError

    def __call__(self, u: Signal) -> Signal:
        return self.apply(u)

    def _check_domain(self, u: Signal) -> None:
        if u.space != self.domain:
            raise DimensionError(f"operator domain {self.domain}, signal on {u.space}")

    def _check_range(self, v: Signal) -> None:
        if v.space != self.range_:
            raise DimensionError(f"operator range {self.range_}, signal on {v.space}")


class Identity(LinearOperator):
    """The identity on a space."""

    def __init__(self, space: Space):
        self.domain = space
        self.range_ = space

    def apply(self, u: Signal) -> Signal:
        self._check_domain(u)
        return u

    def adjoint(self, v: Signal) -> Signal:
        self._check_range(v)
        return v


class DenseMatrix(LinearOperator):
    """A dense matrix acting entrywise on the stored coordinate vectors.

    The forward map is plain ``A @ u``; the adjoint rescales the transpose
    by the ratio of quadrature weights so it is the true adjoint for the
    weighted inner products.  On coordinate spaces (weight 1 on both
    sides) the adjoint is exactly ``A.T @ v``.
    """

    def __init__(self, matrix: np.ndarray, domain: Space, range_: Space):
        A = np.asarray(matrix, dtype=np.float64)
        if A.ndim != 2:
            raise DimensionError("matrix must be 2-dimensional")
        if A.shape != (range_.size, domain.size):
            raise DimensionError(
                f"matrix {A.shape} does not map {domain.size} -> {range_.size}"
            )
        self.matrix = A
        self.domain = domain
        self.range_ = range_

    def apply(self, u: Signal) -> Signal:
        self._check_domain(u)
        return Signal(self.range_, self.matrix @ u.values)

    def adjoint(self, v: Signal) -> Signal:
        self._check_range(v)
        scale = self.range_.weight / self.domain.weight
        return Signal(self.domain, scale * (self.matrix.T @ v.values))


class SampledKernel(DenseMatrix):
    """Integral operator (Ku)(x_j) = int k(x_j, y) u(y) dy on product grids.

    Built from kernel samples k[j, i] = k(x_j, y_i); the forward map is the
    midpoint rule, i.e. the dense matrix h_domain * k.
    """

    def __init__(self, kernel: np.ndarray, domain: Grid1D, range_: Grid1D):
        kernel = np.asarray(kernel, dtype=np.float64)
        super().__init__(domain.h * kernel, domain, range_)
        self.kernel = kernel


# ---------------------------------------------------------------- pairings

def inner(u: Signal, v: Signal, weighted: bool = True) -> float:
    """Inner product of two signals on the same space.

    Weighted (default) uses the space's quadrature weight; unweighted is
    the raw coordinate dot product.
    """
    _check_same_space(u, v)
    w = u.space.weight if weighted else 1.0
    return float(w * np.dot(u.values, v.values))


def norm(u: Signal, weighted: bool = True) -> float:
    return float(np.sqrt(max(inner(u, u, weighted=weighted), 0.0)))


def k_inner(u: Signal, v: Signal, K: LinearOperator) -> float:
    """The operator-induced pairing <Ku, Kv> in the range space."""
    return inner(K.apply(u), K.apply(v))


# ---------------------------------------------------------------- Bregman

@dataclass(frozen=True)
class BregmanRecord:
    """A Bregman distance value together with the subgradient that defined it."""

    value: float
    subgradient: Signal


def bregman_distance(J, v: Signal, u: Signal, p: Signal, tol: float = 1e-6) -> BregmanRecord:
    """Generalized Bregman distance D(v, u) = J(v) - J(u) - <p, v - u>.

    ``p`` must pass J's subgradient certificate at ``u`` (within ``tol``);
    otherwise InvalidSubgradientError is raised with the failed certificate
    attached.  For a valid subgradient the value is nonnegative up to
    rounding.
    """
    cert = J.certify(u, p, tol=tol)
    if not cert.accepted:
        raise InvalidSubgradientError(
            f"offered vector is not a subgradient at u (tol={tol:g})", certificate=cert
        )
    d = J.value(v) - J.value(u) - inner(p, v - u)
    return BregmanRecord(value=float(d), subgradient=p)
