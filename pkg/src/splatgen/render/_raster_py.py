"""Pure-NumPy twin of the compiled compositing kernel."""

from __future__ import annotations

import numpy as np


def composite_tiles(means, conics, colors, opacities, extents, offsets, entries,
                    width: int, height: int, tile_size: int,
                    t_min: float, alpha_max: float, cutoff: float, num_threads: int = 0):
    rgb = np.zeros((height, width, 3))
    alpha = np.zeros((height, width))
    tiles_x = -(-width // tile_size)
    cutoff_sq = cutoff * cutoff
    for t in range(len(offsets) - 1):
        lo, hi = offsets[t], offsets[t + 1]
        if lo == hi:
            continue
        tx, ty = t % tiles_x, t // tiles_x
        xs = np.arange(tx * tile_size, min((tx + 1) * tile_size, width))
        ys = np.arange(ty * tile_size, min((ty + 1) * tile_size, height))
        gx, gy = np.meshgrid(xs, ys)
        s = entries[lo:hi]
        dx = gx.ravel()[None, :] - means[s, 0][:, None]
        dy = gy.ravel()[None, :] - means[s, 1][:, None]
        c = conics[s]
        m = c[:, 0, None] * dx * dx + 2.0 * c[:, 1, None] * dx * dy + c[:, 2, None] * dy * dy
        a = np.minimum(opacities[s][:, None] * np.exp(-0.5 * m), alpha_max)
        a[m > cutoff_sq] = 0.0
        trans_after = np.cumprod(1.0 - a, axis=0)
        # The kernel stops right after the first splat that drops T below t_min.
        below = trans_after < t_min
        done_before = np.zeros_like(below)
        done_before[1:] = np.logical_or.accumulate(below, axis=0)[:-1]
        a[done_before] = 0.0
        trans_before = np.ones_like(a)
        trans_before[1:] = np.cumprod(1.0 - a, axis=0)[:-1]
        w = trans_before * a
        tile_rgb = w.T @ colors[s]
        final_t = trans_before[-1] * (1.0 - a[-1])
        rgb[ys[0]:ys[-1] + 1, xs[0]:xs[-1] + 1] = tile_rgb.reshape(len(ys), len(xs), 3)
        alpha[ys[0]:ys[-1] + 1, xs[0]:xs[-1] + 1] = (1.0 - final_t).reshape(len(ys), len(xs))
    return rgb, alpha
