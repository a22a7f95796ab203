"""Pure-Python fallback kernels.

Mirrors ``_ckernels.pyx`` operation for operation so both backends produce
bit-identical float64 results. Keep the two files in sync when editing.
"""

import math

import numpy as np

INF = math.inf


def lsap(cost):
    """Solve the rectangular linear sum assignment problem.

    Shortest-augmenting-path (Jonker-Volgenant style) with row/column
    potentials, rows <= cols. Returns (row_to_col, u, v) where u/v are the
    optimal dual potentials (v excludes the virtual column).
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n_rows, n_cols = cost.shape
    if n_rows > n_cols:
        raise ValueError("lsap requires rows <= cols")
    if not np.all(np.isfinite(cost)):
        raise ValueError("lsap requires finite costs")
    c = cost.tolist()

    u = [0.0] * n_rows
    v = [0.0] * (n_cols + 1)
    col_row = [-1] * (n_cols + 1)

    for i in range(n_rows):
        col_row[n_cols] = i
        j0 = n_cols
        minv = [INF] * n_cols
        way = [-1] * n_cols
        used = [False] * (n_cols + 1)
        while True:
            used[j0] = True
            i0 = col_row[j0]
            row = c[i0]
            ui0 = u[i0]
            delta = INF
            j1 = -1
            for j in range(n_cols):
                if not used[j]:
                    cur = row[j] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n_cols):
                if used[j]:
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

    row_to_col = np.full(n_rows, -1, dtype=np.int64)
    for j in range(n_cols):
        if col_row[j] >= 0:
            row_to_col[col_row[j]] = j
    return row_to_col, np.asarray(u), np.asarray(v[:n_cols])


def bilinear_sample(grid_u, grid_v, xs, ys):
    """Bilinear interpolation of two displacement grids at float points.

    Points must lie in [0, w-1] x [0, h-1]; the caller enforces bounds.
    Exact at integer grid coordinates.
    """
    grid_u = np.asarray(grid_u, dtype=np.float64)
    grid_v = np.asarray(grid_v, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    h, w = grid_u.shape

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    np.clip(x0, 0, max(w - 2, 0), out=x0)
    np.clip(y0, 0, max(h - 2, 0), out=y0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0

    def interp(g):
        top = (1.0 - fx) * g[y0, x0] + fx * g[y0, x1]
        bot = (1.0 - fx) * g[y1, x0] + fx * g[y1, x1]
        return (1.0 - fy) * top + fy * bot

    return interp(grid_u), interp(grid_v)


def convex_clip_area(poly_a, poly_b):
    """Area of the intersection of two convex polygons.

    Sutherland-Hodgman clip of ``poly_a`` against ``poly_b``; both must be
    convex with positive shoelace orientation.
    """
    subject = [(float(x), float(y)) for x, y in poly_a]
    clip = [(float(x), float(y)) for x, y in poly_b]

    output = subject
    c1x, c1y = clip[-1]
    for c2x, c2y in clip:
        if not output:
            return 0.0
        ex = c2x - c1x
        ey = c2y - c1y
        inp = output
        output = []
        sx, sy = inp[-1]
        s_in = ex * (sy - c1y) - ey * (sx - c1x) >= 0.0
        for px, py in inp:
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
                    output.append(((n1 * dpx - n2 * dcx) * n3,
                                   (n1 * dpy - n2 * dcy) * n3))
            if p_in:
                output.append((px, py))
            sx, sy = px, py
            s_in = p_in
        c1x, c1y = c2x, c2y

    if len(output) < 3:
        return 0.0
    area2 = 0.0
    qx, qy = output[-1]
    for px, py in output:
        area2 += qx * py - px * qy
        qx, qy = px, py
    return abs(area2) * 0.5
