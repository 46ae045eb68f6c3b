# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: per-Gaussian EWA projection and front-to-back tile compositing."""

import numpy as np
from cython.parallel cimport prange
from libc.math cimport ceil, exp, fabs, floor, sqrt
from libc.stdlib cimport free, malloc

# Packed per-splat record inside a tile buffer.
DEF REC = 11
DEF MX = 0
DEF MY = 1
DEF CA = 2
DEF CB = 3
DEF CC = 4
DEF OP = 5
DEF CR = 6
DEF CG = 7
DEF CBL = 8
DEF EX = 9
DEF EY = 10

# Per-row record: a splat restricted to one pixel row of the tile.
DEF RREC = 10
DEF RMX = 0
DEF RCA = 1
DEF RBD = 2
DEF RCD = 3
DEF ROP = 4
DEF RCR = 5
DEF RCG = 6
DEF RCB = 7
DEF RLO = 8
DEF RHI = 9



cdef int _composite_tile(
    Py_ssize_t tile, int tiles_x, int tile_size, int width, int height,
    const double[:, ::1] means, const double[:, ::1] conics, const double[:, ::1] colors,
    const double[::1] opacities, const double[:, ::1] extents,
    const long long[::1] offsets, const long long[::1] entries,
    double t_min, double alpha_max, double cutoff_sq,
    double[:, :, ::1] rgb, double[:, ::1] alpha) noexcept nogil:
    cdef int tx = tile % tiles_x
    cdef int ty = tile // tiles_x
    cdef int x0 = tx * tile_size
    cdef int y0 = ty * tile_size
    cdef int x1 = min(x0 + tile_size, width)
    cdef int y1 = min(y0 + tile_size, height)
    cdef long long start = offsets[tile]
    cdef Py_ssize_t n = <Py_ssize_t>(offsets[tile + 1] - start)
    cdef int px, py
    cdef Py_ssize_t i, k, nrow, s
    cdef double T, r, g, b, dx, dy, m, a, w, bd, cd, disc, h, ctr, pad, lo, hi
    cdef double* buf
    cdef double* rec
    cdef double* rowbuf
    cdef double* rr
    if n == 0:
        for py in range(y0, y1):
            for px in range(x0, x1):
                rgb[py, px, 0] = 0.0
                rgb[py, px, 1] = 0.0
                rgb[py, px, 2] = 0.0
                alpha[py, px] = 0.0
        return 0
    buf = <double*> malloc(n * REC * sizeof(double))
    rowbuf = <double*> malloc(n * RREC * sizeof(double))
    if buf == NULL or rowbuf == NULL:
        free(buf)
        free(rowbuf)
        return -1
    for i in range(n):
        s = entries[start + i]
        rec = buf + i * REC
        rec[MX] = means[s, 0]
        rec[MY] = means[s, 1]
        rec[CA] = conics[s, 0]
        rec[CB] = conics[s, 1]
        rec[CC] = conics[s, 2]
        rec[OP] = opacities[s]
        rec[CR] = colors[s, 0]
        rec[CG] = colors[s, 1]
        rec[CBL] = colors[s, 2]
        rec[EX] = extents[s, 0]
        rec[EY] = extents[s, 1]
    for py in range(y0, y1):
        # Row pass: keep splats whose cutoff ellipse meets this row, with the
        # row-constant parts of the quadratic form and the column span of the
        # ellipse (padded so no accepted pixel is pruned). Order is preserved.
        nrow = 0
        for i in range(n):
            rec = buf + i * REC
            dy = py - rec[MY]
            if fabs(dy) > rec[EY]:
                continue
            bd = 2.0 * rec[CB] * dy
            cd = rec[CC] * dy * dy
            disc = bd * bd - 4.0 * rec[CA] * (cd - cutoff_sq)
            h = sqrt(disc) / (2.0 * rec[CA]) if disc > 0.0 else 0.0
            ctr = rec[MX] - bd / (2.0 * rec[CA])
            pad = 1e-3 + 1e-6 * h
            lo = ceil(ctr - h - pad)
            hi = floor(ctr + h + pad)
            if lo < x0:
                lo = x0
            if hi > x1 - 1:
                hi = x1 - 1
            if lo > hi:
                continue
            rr = rowbuf + nrow * RREC
            rr[RMX] = rec[MX]
            rr[RCA] = rec[CA]
            rr[RBD] = bd
            rr[RCD] = cd
            rr[ROP] = rec[OP]
            rr[RCR] = rec[CR]
            rr[RCG] = rec[CG]
            rr[RCB] = rec[CBL]
            rr[RLO] = lo
            rr[RHI] = hi
            nrow += 1
        for px in range(x0, x1):
            T = 1.0
            r = 0.0
            g = 0.0
            b = 0.0
            for k in range(nrow):
                rr = rowbuf + k * RREC
                if px < rr[RLO] or px > rr[RHI]:
                    continue
                dx = px - rr[RMX]
                m = (rr[RCA] * dx + rr[RBD]) * dx + rr[RCD]
                if m > cutoff_sq:
                    continue
                a = rr[ROP] * exp(-0.5 * m)
                if a > alpha_max:
                    a = alpha_max
                w = T * a
                r += w * rr[RCR]
                g += w * rr[RCG]
                b += w * rr[RCB]
                T = T * (1.0 - a)
                if T < t_min:
                    break
            rgb[py, px, 0] = r
            rgb[py, px, 1] = g
            rgb[py, px, 2] = b
            alpha[py, px] = 1.0 - T
    free(buf)
    free(rowbuf)
    return 0


def composite_tiles(means, conics, colors, opacities, extents, offsets, entries,
                    int width, int height, int tile_size,
                    double t_min, double alpha_max, double cutoff, int num_threads=0):
    """Composite every tile; returns ``(rgb (H, W, 3), alpha (H, W))``.

    ``extents`` are conservative per-axis half-widths of each splat's cutoff
    footprint; they only skip splats that the cutoff test would reject anyway.
    """
    cdef const double[:, ::1] mv = np.ascontiguousarray(means, dtype=np.float64).reshape(-1, 2)
    cdef const double[:, ::1] cv = np.ascontiguousarray(conics, dtype=np.float64).reshape(-1, 3)
    cdef const double[:, ::1] colv = np.ascontiguousarray(colors, dtype=np.float64).reshape(-1, 3)
    cdef const double[::1] ov = np.ascontiguousarray(opacities, dtype=np.float64).reshape(-1)
    cdef const double[:, ::1] exv = np.ascontiguousarray(extents, dtype=np.float64).reshape(-1, 2)
    cdef const long long[::1] offv = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const long long[::1] ev = np.ascontiguousarray(entries, dtype=np.int64)
    out_rgb = np.empty((height, width, 3), dtype=np.float64)
    out_alpha = np.empty((height, width), dtype=np.float64)
    cdef double[:, :, ::1] rgbv = out_rgb
    cdef double[:, ::1] alphav = out_alpha
    cdef int tiles_x = (width + tile_size - 1) // tile_size
    cdef int tiles_y = (height + tile_size - 1) // tile_size
    cdef Py_ssize_t n_tiles = tiles_x * tiles_y
    cdef Py_ssize_t t
    cdef double cutoff_sq = cutoff * cutoff
    cdef int failed = 0
    cdef int nt = num_threads
    if nt <= 0:
        import os
        nt = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    if nt == 1:
        with nogil:
            for t in range(n_tiles):
                failed += _composite_tile(t, tiles_x, tile_size, width, height, mv, cv, colv, ov, exv,
                                          offv, ev, t_min, alpha_max, cutoff_sq, rgbv, alphav)
    else:
        for t in prange(n_tiles, nogil=True, schedule="dynamic", num_threads=nt):
            failed += _composite_tile(t, tiles_x, tile_size, width, height, mv, cv, colv, ov, exv,
                                      offv, ev, t_min, alpha_max, cutoff_sq, rgbv, alphav)
    if failed:
        raise MemoryError("could not allocate tile buffers")
    return out_rgb, out_alpha


def project_geometry(centroids, covariances, rotation, translation,
                     double fx, double fy, double cx, double cy, int width, int height,
                     double z_near, double eps_cov, double cutoff):
    """Per-Gaussian EWA projection for the whole batch.

    Returns ``(valid, means, cov2d, conics, depths, radii, extents)`` with one
    row per input; rows where ``valid`` is false are unspecified.
    """
    cdef const double[:, ::1] p = np.ascontiguousarray(centroids, dtype=np.float64).reshape(-1, 3)
    cdef const double[:, :, ::1] sg = np.ascontiguousarray(covariances, dtype=np.float64).reshape(-1, 3, 3)
    cdef const double[:, ::1] R = np.ascontiguousarray(rotation, dtype=np.float64)
    cdef const double[::1] tr = np.ascontiguousarray(translation, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    valid_a = np.zeros(n, dtype=np.uint8)
    means_a = np.empty((n, 2))
    cov_a = np.empty((n, 2, 2))
    conic_a = np.empty((n, 3))
    depth_a = np.empty(n)
    radii_a = np.empty(n)
    ext_a = np.empty((n, 2))
    cdef unsigned char[::1] valid = valid_a
    cdef double[:, ::1] means = means_a
    cdef double[:, :, ::1] cov = cov_a
    cdef double[:, ::1] conic = conic_a
    cdef double[::1] depth = depth_a
    cdef double[::1] radii = radii_a
    cdef double[:, ::1] ext = ext_a
    cdef Py_ssize_t i
    cdef int a, b, c
    cdef double x, y, z, u, v, j00, j02, j11, j12
    cdef double T[2][3]
    cdef double TS[2][3]
    cdef double c00, c01, c11, mid, rad, l1, l2, vx, vy, nrm, d, det, ex, ey
    with nogil:
        for i in range(n):
            x = R[0, 0] * p[i, 0] + R[0, 1] * p[i, 1] + R[0, 2] * p[i, 2] + tr[0]
            y = R[1, 0] * p[i, 0] + R[1, 1] * p[i, 1] + R[1, 2] * p[i, 2] + tr[1]
            z = R[2, 0] * p[i, 0] + R[2, 1] * p[i, 1] + R[2, 2] * p[i, 2] + tr[2]
            if not z > z_near:
                continue
            u = fx * x / z + cx
            v = fy * y / z + cy
            j00 = fx / z
            j02 = -fx * x / (z * z)
            j11 = fy / z
            j12 = -fy * y / (z * z)
            for c in range(3):
                T[0][c] = j00 * R[0, c] + j02 * R[2, c]
                T[1][c] = j11 * R[1, c] + j12 * R[2, c]
            for a in range(2):
                for c in range(3):
                    TS[a][c] = T[a][0] * sg[i, 0, c] + T[a][1] * sg[i, 1, c] + T[a][2] * sg[i, 2, c]
            c00 = TS[0][0] * T[0][0] + TS[0][1] * T[0][1] + TS[0][2] * T[0][2]
            c01 = 0.5 * ((TS[0][0] * T[1][0] + TS[0][1] * T[1][1] + TS[0][2] * T[1][2])
                         + (TS[1][0] * T[0][0] + TS[1][1] * T[0][1] + TS[1][2] * T[0][2]))
            c11 = TS[1][0] * T[1][0] + TS[1][1] * T[1][1] + TS[1][2] * T[1][2]
            mid = 0.5 * (c00 + c11)
            rad = 0.25 * (c00 - c11) * (c00 - c11) + c01 * c01
            rad = sqrt(rad) if rad > 0 else 0.0
            l1 = mid + rad
            l2 = mid - rad
            if l2 < eps_cov:
                if fabs(c01) > 1e-300:
                    vx = c01
                    vy = l1 - c00
                elif c00 >= c11:
                    vx = 1.0
                    vy = 0.0
                else:
                    vx = 0.0
                    vy = 1.0
                nrm = sqrt(vx * vx + vy * vy)
                vx = vx / nrm
                vy = vy / nrm
                if l1 < eps_cov:
                    l1 = eps_cov
                d = l1 - eps_cov
                c00 = eps_cov + d * vx * vx
                c01 = d * vx * vy
                c11 = eps_cov + d * vy * vy
            ex = cutoff * sqrt(c00) * (1 + 1e-6) + 1e-9
            ey = cutoff * sqrt(c11) * (1 + 1e-6) + 1e-9
            if u + ex < 0 or u - ex > width - 1 or v + ey < 0 or v - ey > height - 1:
                continue
            det = c00 * c11 - c01 * c01
            valid[i] = 1
            means[i, 0] = u
            means[i, 1] = v
            cov[i, 0, 0] = c00
            cov[i, 0, 1] = c01
            cov[i, 1, 0] = c01
            cov[i, 1, 1] = c11
            conic[i, 0] = c11 / det
            conic[i, 1] = -c01 / det
            conic[i, 2] = c00 / det
            depth[i] = z
            radii[i] = cutoff * sqrt(l1)
            ext[i, 0] = ex
            ext[i, 1] = ey
    return valid_a.view(np.bool_), means_a, cov_a, conic_a, depth_a, radii_a, ext_a
