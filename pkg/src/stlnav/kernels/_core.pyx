# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: sliding window min/max, quantitative until, and the
segment cost integral. Must return the same values as `_fallback` (the
window ops are comparison-only, so equality is exact; segment_cost mirrors
the traversal order so the float accumulation matches)."""

from libc.math cimport floor, hypot, INFINITY

import numpy as np


CAP = 1e9
cdef double _CAP = 1e9


def window_min(values, long lo, long hi):
    """Sliding minimum over [t+lo, t+hi] (hi < 0 = unbounded), truncated at
    the trace end; empty windows yield +CAP."""
    cdef double[::1] x = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.full(n, _CAP)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t, head, tail
    cdef long k
    cdef double v

    if n == 0:
        return out_arr
    if hi < 0:
        v = _CAP
        for t in range(n - 1, -1, -1):
            if x[t] < v:
                v = x[t]
            if t - lo >= 0 and t - lo < n:
                out[t - lo] = v
        return out_arr

    # Windows slide left as t decreases: index t+lo enters, indices beyond
    # t+hi expire. Monotonic deque keeps candidate minima.
    idx_arr = np.empty(n, dtype=np.int64)
    cdef long[::1] q = idx_arr
    head = 0
    tail = 0
    for t in range(n - 1, -1, -1):
        k = t + lo
        if k >= n:
            continue  # empty window, stays +CAP
        while tail > head and x[q[tail - 1]] >= x[k]:
            tail -= 1
        q[tail] = k
        tail += 1
        while q[head] > t + hi:
            head += 1
        out[t] = x[q[head]]
    return out_arr


def window_max(values, long lo, long hi):
    """Sliding maximum over [t+lo, t+hi]; empty windows yield -CAP."""
    cdef double[::1] x = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.full(n, -_CAP)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t, head, tail
    cdef long k
    cdef double v

    if n == 0:
        return out_arr
    if hi < 0:
        v = -_CAP
        for t in range(n - 1, -1, -1):
            if x[t] > v:
                v = x[t]
            if t - lo >= 0 and t - lo < n:
                out[t - lo] = v
        return out_arr

    idx_arr = np.empty(n, dtype=np.int64)
    cdef long[::1] q = idx_arr
    head = 0
    tail = 0
    for t in range(n - 1, -1, -1):
        k = t + lo
        if k >= n:
            continue
        while tail > head and x[q[tail - 1]] <= x[k]:
            tail -= 1
        q[tail] = k
        tail += 1
        while q[head] > t + hi:
            head += 1
        out[t] = x[q[head]]
    return out_arr


def until_robustness(left, right, long lo, long hi):
    """out[t] = max_{k in [t+lo, t+hi]} min(right[k], min(left[t..k])),
    inner minimum inclusive, windows truncated at the trace end, empty
    windows -CAP."""
    cdef double[::1] l = np.ascontiguousarray(left, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(right, dtype=np.float64)
    cdef Py_ssize_t n = l.shape[0]
    out_arr = np.full(n, -_CAP)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t, k, k_lo, k_hi
    cdef double run, best, cand

    for t in range(n):
        k_hi = n - 1 if hi < 0 else min(t + hi, n - 1)
        k_lo = t + lo
        if k_lo > k_hi:
            continue
        run = _CAP
        best = -_CAP
        for k in range(t, k_hi + 1):
            if l[k] < run:
                run = l[k]
            if k >= k_lo:
                cand = r[k] if r[k] < run else run
                if cand > best:
                    best = cand
        out[t] = best
    return out_arr


def segment_cost(grid, double x0, double y0, double x1, double y1,
                 double resolution, double blocked_at, double length_weight):
    """Exact cost integral of a straight segment over a cell grid
    (Amanatides-Woo traversal). Returns (cost, blocked)."""
    cdef double[:, ::1] g = np.ascontiguousarray(grid, dtype=np.float64)
    cdef Py_ssize_t h = g.shape[0]
    cdef Py_ssize_t w = g.shape[1]
    cdef double length = hypot(x1 - x0, y1 - y0)
    cdef long col = <long>floor(x0 / resolution)
    cdef long row = <long>floor(y0 / resolution)
    cdef long step_c, step_r
    cdef double dx, dy, t_max_x, t_max_y, t_dx, t_dy
    cdef double cost = 0.0, t = 0.0, t_next, seg, c, next_cx, next_cy

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
        t_max_x = INFINITY
        t_dx = INFINITY
    if step_r != 0:
        next_cy = (row + (1 if step_r > 0 else 0)) * resolution
        t_max_y = (next_cy - y0) / dy
        t_dy = resolution / abs(dy)
    else:
        t_max_y = INFINITY
        t_dy = INFINITY

    while True:
        t_next = t_max_x if t_max_x < t_max_y else t_max_y
        if length < t_next:
            t_next = length
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
