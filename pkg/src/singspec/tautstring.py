"""Exact 1D total variation proximal map via the taut string construction.

The prox problem

    min_u  1/2 sum (u_i - v_i)^2  +  g * sum |u_{i+1} - u_i|

is solved by threading the shortest path (taut string) through the tube of
half-width g around the running sums r_k = v_1 + ... + v_k, with both ends
pinned to the exact endpoints r_0 = 0 and r_n.  The solution is the sequence
of string increments.  Convex bends of the string touch the upper tube wall,
concave bends the lower wall; the sweep below maintains the funnel of
feasible directions from the last fixed point and emits a bend whenever the
funnel collapses.

Runs in O(n) amortized; the output is exact up to rounding, which makes the
piecewise constant test cases of the rest of the package come out at machine
precision.
"""

from __future__ import annotations

from collections import deque

import numpy as np

__all__ = ["taut_string_prox"]


def _cross(o, a, b) -> float:
    """Positive when o -> a -> b is a left turn."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def taut_string_prox(v: np.ndarray, g: float) -> np.ndarray:
    """Euclidean TV prox of the vector v with penalty weight g >= 0."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    if n == 0:
        return v.copy()
    if g < 0:
        raise ValueError("penalty weight must be nonnegative")
    if n == 1 or g == 0.0:
        return v.copy()

    r = np.concatenate([[0.0], np.cumsum(v)])

    # Funnel state: fixed bends of the string, the current apex, and the two
    # hull chains of candidate bend points (upper chain convex, slopes
    # increasing; lower chain concave, slopes decreasing).
    apex = (0, 0.0)
    bends = [apex]
    up: deque = deque()
    dn: deque = deque()

    def insert_upper(pt):
        nonlocal apex
        while len(up) >= 2 and _cross(up[-2], up[-1], pt) <= 0.0:
            up.pop()
        if len(up) == 1 and _cross(apex, up[-1], pt) <= 0.0:
            up.pop()
        if not up:
            # New first upper segment; if it dips below the lower chain the
            # string is forced to bend along the lower wall.
            while dn and _cross(apex, dn[0], pt) < 0.0:
                apex = dn.popleft()
                bends.append(apex)
        up.append(pt)

    def insert_lower(pt):
        nonlocal apex
        while len(dn) >= 2 and _cross(dn[-2], dn[-1], pt) >= 0.0:
            dn.pop()
        if len(dn) == 1 and _cross(apex, dn[-1], pt) >= 0.0:
            dn.pop()
        if not dn:
            while up and _cross(apex, up[0], pt) > 0.0:
                apex = up.popleft()
                bends.append(apex)
        dn.append(pt)

    for k in range(1, n):
        insert_upper((k, r[k] + g))
        insert_lower((k, r[k] - g))
    end = (n, r[n])
    insert_upper(end)
    insert_lower(end)
    bends.append(end)

    u = np.empty(n)
    for (x0, y0), (x1, y1) in zip(bends[:-1], bends[1:]):
        u[x0:x1] = (y1 - y0) / (x1 - x0)
    return u
