"""One-homogeneous penalties: values, proximal maps, subgradient certificates.

Each regularizer knows which kind of space it acts on (1D grid, 2D grid, or
plain coordinates) and uses that space's quadrature weight consistently, so
the subgradient characterization

    <p, u> = J(u),   <p, v> <= J(v) for all v

is tested with the same pairing the solvers use.  ``certify`` reduces the
second condition to an exact dual-norm bound per variant (primitives inside
a unit box for the 1D variants, a divergence-field fit in 2D, plain infinity
or spectral norms in the coordinate cases) and reports one residual per
condition; a certificate is accepted iff every residual is within tolerance.

Proximal maps solve  min_u 1/2 ||u - v||^2 + tau J(u)  in the weighted norm
of the signal's space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft

from .core import (
    Coords,
    DimensionError,
    Grid1D,
    Grid2D,
    Signal,
    Space,
    inner,
    norm,
)
from .tautstring import taut_string_prox

__all__ = [
    "Certificate",
    "Regularizer",
    "TV1D",
    "TVStar1D",
    "AnisoTV2D",
    "L1",
    "GroupL1",
    "Nuclear",
    "QuadraticNorm",
    "SeparableSum",
    "value",
    "prox",
    "certify_subgradient",
]


@dataclass(frozen=True)
class Certificate:
    """Outcome of a subgradient test.

    ``diagnostics`` maps residual names to values; the certificate is
    accepted iff every residual is at most ``tol``.  The tested vector is
    kept as ``p`` for reporting.
    """

    accepted: bool
    tol: float
    diagnostics: dict[str, float]
    p: Signal = field(repr=False, default=None)

    @property
    def max_residual(self) -> float:
        return max(self.diagnostics.values()) if self.diagnostics else 0.0


def _finish(diag: dict[str, float], tol: float, p: Signal) -> Certificate:
    ok = all(r <= tol for r in diag.values())
    return Certificate(accepted=ok, tol=float(tol), diagnostics=diag, p=p)


def _pairing_gap(J, u: Signal, p: Signal) -> float:
    ju = J.value(u)
    return abs(inner(p, u) - ju) / max(1.0, abs(ju))


class Regularizer:
    """Base class; subclasses fix the space kind and the variant rules."""

    space_kind: type = Space

    def _check(self, u: Signal) -> None:
        if not isinstance(u.space, self.space_kind):
            raise DimensionError(
                f"{type(self).__name__} acts on {self.space_kind}, "
                f"got a signal on {type(u.space).__name__}"
            )

    def value(self, u: Signal) -> float:
        raise NotImplementedError

    def prox(self, v: Signal, tau: float) -> Signal:
        raise NotImplementedError

    def certify(self, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
        raise NotImplementedError

    def subgradient(self, u: Signal) -> Signal:
        """A canonical subgradient selection at u (used by searches)."""
        raise NotImplementedError

    def kernel_basis(self, space: Space) -> list[Signal]:
        """Basis of the null space {J = 0}; empty when J is definite."""
        return []


# ------------------------------------------------------------------ TV 1D

class TV1D(Regularizer):
    """Total variation sum |u_{i+1} - u_i| on a 1D grid (no boundary terms).

    The null space is the constants.  A subgradient p is certified through
    its primitive q_k = h (p_1 + ... + p_k): p pairs as
    <p, u> = sum (-q_k)(u_{k+1} - u_k), so p is valid iff |q| <= 1 on the
    interior, q_n = 0, and the pairing is tight.
    """

    space_kind = Grid1D

    def value(self, u: Signal) -> float:
        self._check(u)
        return float(np.sum(np.abs(np.diff(u.values))))

    def prox(self, v: Signal, tau: float) -> Signal:
        self._check(v)
        g = float(tau) / v.space.h
        return Signal(v.space, taut_string_prox(v.values, g))

    def certify(self, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
        self._check(u)
        self._check(p)
        q = u.space.h * np.cumsum(p.values)
        diag = {
            "pairing_gap": _pairing_gap(self, u, p),
            "dual_excess": max(0.0, float(np.max(np.abs(q[:-1]), initial=0.0)) - 1.0),
            "mean_residual": abs(float(q[-1])),
        }
        return _finish(diag, tol, p)

    def subgradient(self, u: Signal) -> Signal:
        self._check(u)
        sigma = np.concatenate([[0.0], np.sign(np.diff(u.values)), [0.0]])
        return Signal(u.space, (sigma[:-1] - sigma[1:]) / u.space.h)

    def kernel_basis(self, space: Space) -> list[Signal]:
        return [Signal(space, np.ones(space.size))]


# -------------------------------------------------------- TV with boundary

class TVStar1D(Regularizer):
    """Total variation of the zero-extended signal: interior jumps plus
    |u_1| and |u_n|.

    Definite (no null space).  The pairing runs over the padded differences,
    which sum to zero, so the primitive of p is only fixed up to an additive
    constant: p is valid iff some shift of its primitive fits in [-1, 1],
    i.e. (max q - min q) / 2 <= 1.
    """

    space_kind = Grid1D

    def value(self, u: Signal) -> float:
        self._check(u)
        v = u.values
        return float(np.sum(np.abs(np.diff(v))) + abs(v[0]) + abs(v[-1]))

    def prox(self, v: Signal, tau: float) -> Signal:
        self._check(v)
        g = float(tau) / v.space.h
        if g == 0.0:
            return v
        return Signal(v.space, _prox_padded_tv(v.values, g))

    def certify(self, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
        self._check(u)
        self._check(p)
        q = np.concatenate([[0.0], u.space.h * np.cumsum(p.values)])
        half_range = 0.5 * float(q.max() - q.min())
        diag = {
            "pairing_gap": _pairing_gap(self, u, p),
            "dual_excess": max(0.0, half_range - 1.0),
        }
        return _finish(diag, tol, p)

    def subgradient(self, u: Signal) -> Signal:
        self._check(u)
        sigma = np.sign(np.diff(u.values, prepend=0.0, append=0.0))
        return Signal(u.space, (sigma[:-1] - sigma[1:]) / u.space.h)


def _prox_padded_tv(v: np.ndarray, g: float) -> np.ndarray:
    """Euclidean prox of g * || padded-diff(u) ||_1 by its dual box problem.

    The dual variable phi lives on the n+1 jump positions; the primal
    solution is u = v + diff(phi).  Solved by FISTA with adaptive restart
    and a duality-gap stop, which reaches the polyhedral solution to
    rounding on the sizes used here.
    """
    n = v.shape[0]
    scale = float(np.dot(v, v)) + 1.0
    phi = np.zeros(n + 1)
    y = phi.copy()
    t = 1.0
    step = 0.25
    f_prev = np.inf
    for it in range(1, 200001):
        resid = -np.diff(y) - v
        grad = np.diff(resid, prepend=0.0, append=0.0)
        phi_new = np.clip(y - step * grad, -g, g)
        f_new = 0.5 * float(np.sum((np.diff(phi_new) + v) ** 2))
        if f_new > f_prev:
            y = phi_new.copy()
            t = 1.0
            f_prev = np.inf
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = phi_new + ((t - 1.0) / t_new) * (phi_new - phi)
            t = t_new
            f_prev = f_new
        moved = float(np.max(np.abs(phi_new - phi)))
        phi = phi_new
        if it % 25 == 0 or moved == 0.0:
            u = v + np.diff(phi)
            primal = 0.5 * float(np.sum((u - v) ** 2)) + g * float(
                np.sum(np.abs(np.diff(u, prepend=0.0, append=0.0)))
            )
            bp = -np.diff(phi)
            dual = float(np.dot(bp, v)) - 0.5 * float(np.dot(bp, bp))
            if primal - dual <= 1e-15 * scale or moved == 0.0:
                break
    return v + np.diff(phi)


# ------------------------------------------------------ anisotropic TV 2D

class AnisoTV2D(Regularizer):
    """Anisotropic total variation h * (sum |d_x u| + sum |d_y u|) on an
    n-by-n grid with Neumann (no-flux) boundaries.

    Null space: constants.  Certification looks for a vector field
    (phi_x, phi_y) on cell interfaces with componentwise |phi| <= 1 whose
    discrete divergence reproduces p.  The candidate field is the gradient
    of the Neumann Poisson solution (computed exactly by cosine transforms);
    if that field overshoots the box, a clipped least-squares fit is tried
    before rejecting.
    """

    space_kind = Grid2D

    def value(self, u: Signal) -> float:
        self._check(u)
        U = u.as_matrix()
        h = u.space.h
        return float(h * (np.sum(np.abs(np.diff(U, axis=0))) + np.sum(np.abs(np.diff(U, axis=1)))))

    def prox(self, v: Signal, tau: float) -> Signal:
        self._check(v)
        g = float(tau) / v.space.h
        if g == 0.0:
            return v
        V = v.as_matrix()
        U = _prox_aniso(V, g)
        return Signal(v.space, U.reshape(-1))

    def certify(self, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
        self._check(u)
        self._check(p)
        P = p.as_matrix()
        h = p.space.h
        mean = float(P.mean())
        P0 = P - mean
        phix, phiy = _poisson_field(P0, h)
        pnorm = max(1.0, norm(p))
        excess = _field_excess(phix, phiy)
        resid = _field_residual(phix, phiy, P0, h) / pnorm
        if excess > tol:
            phix, phiy = _fit_field(P0, h, phix, phiy)
            excess = _field_excess(phix, phiy)
            resid = _field_residual(phix, phiy, P0, h) / pnorm
        diag = {
            "pairing_gap": _pairing_gap(self, u, p),
            "mean_residual": abs(mean),
            "dual_excess": max(0.0, excess),
            "field_residual": resid,
        }
        return _finish(diag, tol, p)

    def subgradient(self, u: Signal) -> Signal:
        self._check(u)
        U = u.as_matrix()
        h = u.space.h
        sx = np.sign(np.diff(U, axis=0))
        sy = np.sign(np.diff(U, axis=1))
        P = -(_pad_diff_t(sx, axis=0) + _pad_diff_t(sy, axis=1)) / h
        return Signal(u.space, P.reshape(-1))

    def kernel_basis(self, space: Space) -> list[Signal]:
        return [Signal(space, np.ones(space.size))]


def _pad_diff_t(phi: np.ndarray, axis: int) -> np.ndarray:
    """Adjoint of the forward difference along an axis: phi_{j-1} - phi_j."""
    return -np.diff(phi, axis=axis, prepend=0.0, append=0.0)


def _div(phix: np.ndarray, phiy: np.ndarray, h: float) -> np.ndarray:
    return -(_pad_diff_t(phix, axis=0) + _pad_diff_t(phiy, axis=1)) / h


def _field_excess(phix: np.ndarray, phiy: np.ndarray) -> float:
    mx = float(np.max(np.abs(phix))) if phix.size else 0.0
    my = float(np.max(np.abs(phiy))) if phiy.size else 0.0
    return max(mx, my) - 1.0


def _field_residual(phix, phiy, P0, h) -> float:
    R = _div(phix, phiy, h) - P0
    return float(h * np.sqrt(np.sum(R * R)))


def _poisson_field(P0: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient field of the Neumann Poisson solution of div phi = P0."""
    n = P0.shape[0]
    rhs = -h * P0
    coeff = scipy.fft.dctn(rhs, type=2, norm="ortho")
    k = np.arange(n)
    lam1 = 4.0 * np.sin(np.pi * k / (2.0 * n)) ** 2
    denom = lam1[:, None] + lam1[None, :]
    denom[0, 0] = 1.0
    coeff = coeff / denom
    coeff[0, 0] = 0.0
    psi = scipy.fft.idctn(coeff, type=2, norm="ortho")
    return np.diff(psi, axis=0), np.diff(psi, axis=1)


def _fit_field(P0, h, phix0, phiy0, iters: int = 3000):
    """Least-squares fit of div phi = P0 with phi clipped to the unit box."""
    phix = np.clip(phix0, -1.0, 1.0)
    phiy = np.clip(phiy0, -1.0, 1.0)
    yx, yy = phix.copy(), phiy.copy()
    t = 1.0
    step = h * h / 8.0
    best = (np.inf, phix, phiy)
    f_prev = np.inf
    for _ in range(iters):
        R = _div(yx, yy, h) - P0
        gx = np.diff(R, axis=0) / h
        gy = np.diff(R, axis=1) / h
        nx = np.clip(yx - step * gx, -1.0, 1.0)
        ny = np.clip(yy - step * gy, -1.0, 1.0)
        Rn = _div(nx, ny, h) - P0
        f_new = float(np.sum(Rn * Rn))
        if f_new < best[0]:
            best = (f_new, nx, ny)
        if f_new > f_prev:
            yx, yy = nx.copy(), ny.copy()
            t = 1.0
            f_prev = np.inf
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            yx = nx + beta * (nx - phix)
            yy = ny + beta * (ny - phiy)
            t = t_new
            f_prev = f_new
        phix, phiy = nx, ny
    return best[1], best[2]


def _prox_aniso(V: np.ndarray, g: float, iters: int = 20000) -> np.ndarray:
    """Dual projection scheme for the anisotropic TV prox on a 2D array."""
    n0, n1 = V.shape
    phix = np.zeros((n0 - 1, n1))
    phiy = np.zeros((n0, n1 - 1))
    yx, yy = phix.copy(), phiy.copy()
    t = 1.0
    step = 0.125
    scale = float(np.sum(V * V)) + 1.0
    f_prev = np.inf

    def recon(fx, fy):
        return V - (_pad_diff_t(fx, axis=0) + _pad_diff_t(fy, axis=1))

    for it in range(1, iters + 1):
        U = recon(yx, yy)
        nx = np.clip(yx + step * np.diff(U, axis=0), -g, g)
        ny = np.clip(yy + step * np.diff(U, axis=1), -g, g)
        Un = recon(nx, ny)
        # The box-constrained dual objective is 1/2 ||recon||^2 up to a
        # constant; restart FISTA momentum whenever it increases.
        f_new = 0.5 * float(np.sum(Un * Un))
        if f_new > f_prev:
            yx, yy = nx.copy(), ny.copy()
            t = 1.0
            f_prev = np.inf
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            yx = nx + beta * (nx - phix)
            yy = ny + beta * (ny - phiy)
            t = t_new
            f_prev = f_new
        phix, phiy = nx, ny
        if it % 25 == 0:
            U = recon(phix, phiy)
            primal = 0.5 * float(np.sum((U - V) ** 2)) + g * float(
                np.sum(np.abs(np.diff(U, axis=0))) + np.sum(np.abs(np.diff(U, axis=1)))
            )
            w = V - U
            dual = float(np.sum(w * V)) - 0.5 * float(np.sum(w * w))
            if primal - dual <= 1e-13 * scale:
                break
    return recon(phix, phiy)


# ------------------------------------------------------------- coordinate

class L1(Regularizer):
    """The l1 norm on coordinate vectors."""

    space_kind = Coords

    def value(self, u: Signal) -> float:
        self._check(u)
        return float(np.sum(np.abs(u.values)))

    def prox(self, v: Signal, tau: float) -> Signal:
        self._check(v)
        x = v.values
        return Signal(v.space, np.sign(x) * np.maximum(np.abs(x) - tau, 0.0))

    def certify(self, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
        self._check(u)
        self._check(p)
        diag = {
            "pairing_gap": _pairing_gap(self, u, p),
            "dual_excess": max(0.0, float(np.max(np.abs(p.values), initial=0.0)) - 1.0),
        }
        return _finish(diag, tol, p)

    def subgradient(self, u: Signal) -> Signal:
        self._check(u)
        return Signal(u.space, np.sign(u.values))


class GroupL1(Regularizer):
    """Sum of Euclidean norms over consecutive blocks of the coordinates."""

    space_kind = Coords

    def __init__(self, block_sizes: Sequence[int]):
        sizes = [int(s) for s in block_sizes]
        if not sizes or any(s < 1 for s in sizes):
            raise DimensionError("block sizes must be positive integers")
        self.block_sizes = tuple(sizes)
        ends = np.cumsum(sizes)
        self._slices = [slice(e - s, e) for s, e in zip(sizes, ends)]
        self.dim = int(ends[-1])

    def _check(self, u: Signal) -> None:
        super()._check(u)
        if u.space.size != self.dim:
            raise DimensionError(
                f"blocks cover {self.dim} coordinates, signal has {u.space.size}"
            )

    def value(self, u: Signal) -> float:
        self._check(u)
        return float(sum(np.linalg.norm(u.values[s]) for s in self._slices))

    def prox(self, v: Signal, tau: float) -> Signal:
        self._check(v)
        out = v.values.copy()
        for s in self._slices:
            nb = np.linalg.norm(out[s])
            out[s] *= 0.0 if nb <= tau else 1.0 - tau / nb
        return Signal(v.space, out)

    def certify(self, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
        self._check(u)
        self._check(p)
        worst = max(np.linalg.norm(p.values[s]) for s in self._slices)
        diag = {
            "pairing_gap": _pairing_gap(self, u, p),
            "dual_excess": max(0.0, float(worst) - 1.0),
        }
        return _finish(diag, tol, p)

    def subgradient(self, u: Signal) -> Signal:
        self._check(u)
        out = np.zeros_like(u.values)
        for s in self._slices:
            nb = np.linalg.norm(u.values[s])
            if nb > 0.0:
                out[s] = u.values[s] / nb
        return Signal(u.space, out)


class Nuclear(Regularizer):
    """Nuclear norm of vectors viewed as m-by-n matrices (row-major)."""

    space_kind = Coords

    def __init__(self, shape: tuple[int, int]):
        m, n = int(shape[0]), int(shape[1])
        if m < 1 or n < 1:
            raise DimensionError("matrix shape must be positive")
        self.shape = (m, n)

    def _check(self, u: Signal) -> None:
        super()._check(u)
        if u.space.size != self.shape[0] * self.shape[1]:
            raise DimensionError(
                f"shape {self.shape} needs {self.shape[0] * self.shape[1]} "
                f"coordinates, signal has {u.space.size}"
            )

    def _mat(self, u: Signal) -> np.ndarray:
        return u.values.reshape(self.shape)

    def value(self, u: Signal) -> float:
        self._check(u)
        return float(np.sum(np.linalg.svd(self._mat(u), compute_uv=False)))

    def prox(self, v: Signal, tau: float) -> Signal:
        self._check(v)
        W, s, Vt = np.linalg.svd(self._mat(v), full_matrices=False)
        s = np.maximum(s - tau, 0.0)
        return Signal(v.space, (W * s) @ Vt)

    def certify(self, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
        self._check(u)
        self._check(p)
        opnorm = float(np.linalg.svd(self._mat(p), compute_uv=False)[0])
        diag = {
            "pairing_gap": _pairing_gap(self, u, p),
            "dual_excess": max(0.0, opnorm - 1.0),
        }
        return _finish(diag, tol, p)

    def subgradient(self, u: Signal) -> Signal:
        self._check(u)
        W, s, Vt = np.linalg.svd(self._mat(u), full_matrices=False)
        keep = s > 1e-12 * max(1.0, s[0] if s.size else 0.0)
        P = W[:, keep] @ Vt[keep, :]
        return Signal(u.space, P)


class QuadraticNorm(Regularizer):
    """One half the squared weighted norm; not one-homogeneous.

    Its differential is the identity, so certification is the equality
    p = u instead of a dual-norm test.
    """

    space_kind = Space

    def value(self, u: Signal) -> float:
        return 0.5 * inner(u, u)

    def prox(self, v: Signal, tau: float) -> Signal:
        return Signal(v.space, v.values / (1.0 + tau))

    def certify(self, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
        mismatch = norm(p - u) / max(1.0, norm(u))
        return _finish({"gradient_mismatch": mismatch}, tol, p)

    def subgradient(self, u: Signal) -> Signal:
        return u


class SeparableSum(Regularizer):
    """Sum of coordinate regularizers on consecutive blocks.

    Composition helper for product-space problems: the value, prox, and
    certificate all factor blockwise.
    """

    space_kind = Coords

    def __init__(self, parts: Sequence[tuple[Regularizer, int]]):
        self.parts = [(r, int(d)) for r, d in parts]
        if not self.parts or any(d < 1 for _, d in self.parts):
            raise DimensionError("blocks must have positive dimension")
        ends = np.cumsum([d for _, d in self.parts])
        self._slices = [slice(e - d, e) for (_, d), e in zip(self.parts, ends)]
        self.dim = int(ends[-1])

    def _check(self, u: Signal) -> None:
        super()._check(u)
        if u.space.size != self.dim:
            raise DimensionError(
                f"parts cover {self.dim} coordinates, signal has {u.space.size}"
            )

    def _split(self, u: Signal) -> list[Signal]:
        return [
            Signal(Coords(d), u.values[s])
            for (_, d), s in zip(self.parts, self._slices)
        ]

    def value(self, u: Signal) -> float:
        self._check(u)
        return float(sum(r.value(b) for (r, _), b in zip(self.parts, self._split(u))))

    def prox(self, v: Signal, tau: float) -> Signal:
        self._check(v)
        out = np.concatenate(
            [r.prox(b, tau).values for (r, _), b in zip(self.parts, self._split(v))]
        )
        return Signal(v.space, out)

    def certify(self, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
        self._check(u)
        self._check(p)
        diag = {"pairing_gap": _pairing_gap(self, u, p)}
        for i, ((r, _), ub, pb) in enumerate(
            zip(self.parts, self._split(u), self._split(p))
        ):
            sub = r.certify(ub, pb, tol=tol)
            for name, val in sub.diagnostics.items():
                if name != "pairing_gap":
                    diag[f"block{i}_{name}"] = val
        return _finish(diag, tol, p)

    def subgradient(self, u: Signal) -> Signal:
        self._check(u)
        out = np.concatenate(
            [r.subgradient(b).values for (r, _), b in zip(self.parts, self._split(u))]
        )
        return Signal(u.space, out)


# ------------------------------------------------------------- module ops

def value(J: Regularizer, u: Signal) -> float:
    return J.value(u)


def prox(J: Regularizer, v: Signal, tau: float) -> Signal:
    return J.prox(v, tau)


def certify_subgradient(J: Regularizer, u: Signal, p: Signal, tol: float = 1e-6) -> Certificate:
    return J.certify(u, p, tol=tol)
