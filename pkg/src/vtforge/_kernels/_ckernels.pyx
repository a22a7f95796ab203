# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot inner loops.

Keep in sync with ``_pykernels.py``: same algorithms, same operation order,
so both backends return bit-identical float64 results.
"""

from libc.math cimport floor, fabs, INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()


def lsap(cost):
    """Rectangular linear sum assignment via shortest augmenting paths.

    Returns (row_to_col, u, v) with optimal dual potentials.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] c = \
        np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n_rows = c.shape[0]
    cdef Py_ssize_t n_cols = c.shape[1]
    if n_rows > n_cols:
        raise ValueError("lsap requires rows <= cols")
    if not np.all(np.isfinite(c)):
        raise ValueError("lsap requires finite costs")

    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.zeros(n_rows, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.zeros(n_cols + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] col_row = np.full(n_cols + 1, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] minv = np.empty(n_cols, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] way = np.empty(n_cols, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] used = np.empty(n_cols + 1, dtype=np.uint8)

    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur, ui0

    for i in range(n_rows):
        col_row[n_cols] = i
        j0 = n_cols
        for j in range(n_cols):
            minv[j] = INFINITY
            way[j] = -1
        for j in range(n_cols + 1):
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = col_row[j0]
            ui0 = u[i0]
            delta = INFINITY
            j1 = -1
            for j in range(n_cols):
                if used[j] == 0:
                    cur = c[i0, j] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n_cols):
                if used[j] == 1:
                    u[col_row[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            u[col_row[n_cols]] += delta
            v[n_cols] -= delta
            j0 = j1
            if col_row[j0] == -1:
                break
        while True:
            j1 = way[j0]
            col_row[j0] = col_row[j1]
            j0 = j1
            if j0 == n_cols:
                break

    cdef cnp.ndarray[cnp.int64_t, ndim=1] row_to_col = np.full(n_rows, -1, dtype=np.int64)
    for j in range(n_cols):
        if col_row[j] >= 0:
            row_to_col[col_row[j]] = j
    return row_to_col, u, v[:n_cols].copy()


def bilinear_sample(grid_u, grid_v, xs, ys):
    """Bilinear interpolation of two displacement grids at float points."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] gu = \
        np.ascontiguousarray(grid_u, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] gv = \
        np.ascontiguousarray(grid_v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = \
        np.ascontiguousarray(xs, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = \
        np.ascontiguousarray(ys, dtype=np.float64).ravel()
    cdef Py_ssize_t h = gu.shape[0]
    cdef Py_ssize_t w = gu.shape[1]
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] du = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dv = np.empty(n, dtype=np.float64)

    cdef Py_ssize_t k, x0, y0, x1, y1
    cdef double fx, fy, top, bot

    for k in range(n):
        x0 = <Py_ssize_t>floor(x[k])
        y0 = <Py_ssize_t>floor(y[k])
        if x0 > w - 2:
            x0 = w - 2
        if x0 < 0:
            x0 = 0
        if y0 > h - 2:
            y0 = h - 2
        if y0 < 0:
            y0 = 0
        x1 = x0 + 1 if x0 + 1 <= w - 1 else w - 1
        y1 = y0 + 1 if y0 + 1 <= h - 1 else h - 1
        fx = x[k] - <double>x0
        fy = y[k] - <double>y0
        top = (1.0 - fx) * gu[y0, x0] + fx * gu[y0, x1]
        bot = (1.0 - fx) * gu[y1, x0] + fx * gu[y1, x1]
        du[k] = (1.0 - fy) * top + fy * bot
        top = (1.0 - fx) * gv[y0, x0] + fx * gv[y0, x1]
        bot = (1.0 - fx) * gv[y1, x0] + fx * gv[y1, x1]
        dv[k] = (1.0 - fy) * top + fy * bot
    return du, dv


def convex_clip_area(poly_a, poly_b):
    """Sutherland-Hodgman intersection area of two convex polygons."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] a = \
        np.ascontiguousarray(poly_a, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] b = \
        np.ascontiguousarray(poly_b, dtype=np.float64)
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    # worst case vertex count for repeated half-plane clipping
    cdef Py_ssize_t cap = na + nb + 8
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] buf1 = np.empty((cap, 2), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] buf2 = np.empty((cap, 2), dtype=np.float64)
    cdef double[:, ::1] cur = buf1
    cdef double[:, ::1] nxt = buf2
    cdef double[:, ::1] tmp

    cdef Py_ssize_t n_cur = na
    cdef Py_ssize_t n_nxt, k, m
    cdef double c1x, c1y, c2x, c2y, ex, ey
    cdef double sx, sy, px, py
    cdef double dcx, dcy, dpx, dpy, den, n1, n2, n3
    cdef bint s_in, p_in

    for k in range(na):
        cur[k, 0] = a[k, 0]
        cur[k, 1] = a[k, 1]

    c1x = b[nb - 1, 0]
    c1y = b[nb - 1, 1]
    for m in range(nb):
        c2x = b[m, 0]
        c2y = b[m, 1]
        if n_cur == 0:
            return 0.0
        ex = c2x - c1x
        ey = c2y - c1y
        n_nxt = 0
        sx = cur[n_cur - 1, 0]
        sy = cur[n_cur - 1, 1]
        s_in = ex * (sy - c1y) - ey * (sx - c1x) >= 0.0
        for k in range(n_cur):
            px = cur[k, 0]
            py = cur[k, 1]
            p_in = ex * (py - c1y) - ey * (px - c1x) >= 0.0
            if p_in != s_in:
                dcx = c1x - c2x
                dcy = c1y - c2y
                dpx = sx - px
                dpy = sy - py
                den = dcx * dpy - dcy * dpx
                if den != 0.0:
                    n1 = c1x * c2y - c1y * c2x
                    n2 = sx * py - sy * px
                    n3 = 1.0 / den
                    nxt[n_nxt, 0] = (n1 * dpx - n2 * dcx) * n3
                    nxt[n_nxt, 1] = (n1 * dpy - n2 * dcy) * n3
                    n_nxt += 1
            if p_in:
                nxt[n_nxt, 0] = px
                nxt[n_nxt, 1] = py
                n_nxt += 1
            sx = px
            sy = py
            s_in = p_in
        tmp = cur
        cur = nxt
        nxt = tmp
        n_cur = n_nxt
        c1x = c2x
        c1y = c2y

    if n_cur < 3:
        return 0.0
    cdef double area2 = 0.0
    cdef double qx = cur[n_cur - 1, 0]
    cdef double qy = cur[n_cur - 1, 1]
    for k in range(n_cur):
        px = cur[k, 0]
        py = cur[k, 1]
        area2 += qx * py - px * qy
        qx = px
        qy = py
    return fabs(area2) * 0.5
