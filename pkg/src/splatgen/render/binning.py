"""Tile binning: per-tile splat lists in global (depth, index) order."""

from __future__ import annotations

import numpy as np

MAX_TILE_ENTRIES = 1 << 28


class RenderResourceError(MemoryError):
    pass


def depth_order(depths: np.ndarray, index: np.ndarray) -> np.ndarray:
    """Permutation sorting splats by depth, ties broken by source index."""
    return np.lexsort((index, depths))


def bin_splats(means, extents, order, width: int, height: int, tile_size: int,
               max_entries: int = MAX_TILE_ENTRIES) -> tuple[np.ndarray, np.ndarray]:
    """Build-then-freeze tile lists.

    Returns ``(offsets, entries)``: the splats touching tile ``t`` are
    ``entries[offsets[t]:offsets[t+1]]``, already in front-to-back order.
    """
    tiles_x = -(-width // tile_size)
    tiles_y = -(-height // tile_size)
    n_tiles = tiles_x * tiles_y
    if len(order) == 0:
        return np.zeros(n_tiles + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    m = means[order]
    e = extents[order]
    x0 = np.clip(np.floor((m[:, 0] - e[:, 0]) / tile_size), 0, tiles_x - 1).astype(np.int64)
    x1 = np.clip(np.floor((m[:, 0] + e[:, 0]) / tile_size), 0, tiles_x - 1).astype(np.int64)
    y0 = np.clip(np.floor((m[:, 1] - e[:, 1]) / tile_size), 0, tiles_y - 1).astype(np.int64)
    y1 = np.clip(np.floor((m[:, 1] + e[:, 1]) / tile_size), 0, tiles_y - 1).astype(np.int64)
    wx = x1 - x0 + 1
    counts = wx * (y1 - y0 + 1)
    total = int(counts.sum())
    if total > max_entries:
        raise RenderResourceError(
            f"tile binning needs {total} entries, limit is {max_entries}")
    owner = np.repeat(np.arange(len(order)), counts)
    starts = np.cumsum(counts) - counts
    local = np.arange(total) - starts[owner]
    tile = (y0[owner] + local // wx[owner]) * tiles_x + (x0[owner] + local % wx[owner])
    # Stable sort on tile id keeps the depth order inside each tile.
    perm = np.argsort(tile, kind="stable")
    entries = order[owner[perm]].astype(np.int64)
    offsets = np.zeros(n_tiles + 1, dtype=np.int64)
    np.cumsum(np.bincount(tile, minlength=n_tiles), out=offsets[1:])
    return offsets, entries
