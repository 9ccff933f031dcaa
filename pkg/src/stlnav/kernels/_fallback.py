"""Pure NumPy implementations of the hot kernels.

These are the reference semantics; the Cython module `_core` implements the
same functions with identical results (bit-identical for the window
operations, which perform no arithmetic, and identical traversal order for
the cost integrals). Selection happens in `stlnav.kernels.__init__`.
"""

from __future__ import annotations

import math

import numpy as np

CAP = 1e9


def window_min(values: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Sliding minimum over the sample window [t+lo, t+hi], truncated at the
    trace end. `hi < 0` means an unbounded upper bound. Empty windows yield
    +CAP (the identity of min)."""
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[0]
    if hi < 0:
        suffix = np.minimum.accumulate(x[::-1])[::-1]
        out = np.full(n, CAP)
        if lo < n:
            out[: n - lo] = suffix[lo:]
        return out
    width = hi - lo + 1
    padded = np.concatenate([x, np.full(hi + 1, CAP)])
    win = np.lib.stride_tricks.sliding_window_view(padded, width)
    return win[lo : lo + n].min(axis=1)


def window_max(values: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Sliding maximum over [t+lo, t+hi]; empty windows yield -CAP."""
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[0]
    if hi < 0:
        suffix = np.maximum.accumulate(x[::-1])[::-1]
        out = np.full(n, -CAP)
        if lo < n:
            out[: n - lo] = suffix[lo:]
        return out
    width = hi - lo + 1
    padded = np.concatenate([x, np.full(hi + 1, -CAP)])
    win = np.lib.stride_tricks.sliding_window_view(padded, width)
    return win[lo : lo + n].max(axis=1)


def until_robustness(left: np.ndarray, right: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Quantitative until over sample offsets [lo, hi] (hi < 0 = unbounded):

        out[t] = max_{k in [t+lo, t+hi]} min(right[k], min(left[t..k]))

    with the inner minimum inclusive of both endpoints and windows truncated
    at the trace end. Empty windows yield -CAP.
    """
    l = np.asarray(left, dtype=np.float64)
    r = np.asarray(right, dtype=np.float64)
    n = l.shape[0]
    out = np.full(n, -CAP)
    for t in range(n):
        k_hi = n - 1 if hi < 0 else min(t + hi, n - 1)
        k_lo = t + lo
        if k_lo > k_hi:
            continue
        run = np.minimum.accumulate(l[t : k_hi + 1])
        cand = np.minimum(r[k_lo : k_hi + 1], run[k_lo - t :])
        out[t] = cand.max()
    return out


def segment_cost(
    grid: np.ndarray,
    x0: float,
    y0: float,
    x1: float,
    y1: float,
    resolution: float,
    blocked_at: float,
    length_weight: float,
) -> tuple[float, bool]:
    """Exact cost integral of a straight segment over a cell grid.

    Walks the cells the segment crosses (Amanatides-Woo traversal),
    accumulating grid[cell] * length_inside_cell + length_weight * length.
    Returns (cost, blocked); blocked is True if the segment leaves the grid
    or touches a cell with grid[cell] >= blocked_at for a positive length.
    """
    g = np.asarray(grid, dtype=np.float64)
    h, w = g.shape
    length = math.hypot(x1 - x0, y1 - y0)

    col = math.floor(x0 / resolution)
    row = math.floor(y0 / resolution)
    if col < 0 or col >= w or row < 0 or row >= h:
        return 0.0, True
    if length == 0.0:
        return 0.0, g[row, col] >= blocked_at

    dx = (x1 - x0) / length
    dy = (y1 - y0) / length
    step_c = 1 if dx > 0 else (-1 if dx < 0 else 0)
    step_r = 1 if dy > 0 else (-1 if dy < 0 else 0)

    if step_c != 0:
        next_cx = (col + (1 if step_c > 0 else 0)) * resolution
        t_max_x = (next_cx - x0) / dx
        t_dx = resolution / abs(dx)
    else:
        t_max_x = math.inf
        t_dx = math.inf
    if step_r != 0:
        next_cy = (row + (1 if step_r > 0 else 0)) * resolution
        t_max_y = (next_cy - y0) / dy
        t_dy = resolution / abs(dy)
    else:
        t_max_y = math.inf
        t_dy = math.inf

    cost = 0.0
    t = 0.0
    while True:
        t_next = min(t_max_x, t_max_y, length)
        seg = t_next - t
        if seg > 0.0:
            c = g[row, col]
            if c >= blocked_at:
                return cost, True
            cost += c * seg
        if t_next >= length:
            break
        if t_max_x < t_max_y:
            col += step_c
            t_max_x += t_dx
        elif t_max_y < t_max_x:
            row += step_r
            t_max_y += t_dy
        else:
            col += step_c
            row += step_r
            t_max_x += t_dx
            t_max_y += t_dy
        if col < 0 or col >= w or row < 0 or row >= h:
            return cost, True
        t = t_next
    return cost + length_weight * length, False
