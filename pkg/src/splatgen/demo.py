"""Self-contained demo dictionaries: procedural assets, motions and backgrounds."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from . import rng
from .assets import humanoid_skeleton, procedural_test_asset, save_asset
from .kinematics import procedural_motion, save_motion


def gradient_background(width: int, height: int, seed: int) -> np.ndarray:
    """Smooth two-colour gradient with a horizon band, uint8 (H, W, 3)."""
    g = np.random.default_rng(rng.derive_seed(seed, rng.STREAM_BACKGROUND))
    top, bottom = g.uniform(0.2, 0.9, size=(2, 3))
    t = np.linspace(0.0, 1.0, height)[:, None, None]
    img = top * (1 - t) + bottom * t
    img = np.broadcast_to(img, (height, width, 3)).copy()
    band = slice(int(0.55 * height), int(0.6 * height))
    img[band] *= 0.7
    return np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)


def make_demo(root, n_assets: int = 2, n_motions: int = 1, n_backgrounds: int = 2,
              n_gaussians: int = 3000, n_frames: int = 8, size: int = 128, clips: int = 2,
              seed: int = 0, sport: str = "demo") -> Path:
    """Write ``assets/``, ``motions/``, ``backgrounds/`` and ``run.yaml`` under ``root``.

    Returns the config path.
    """
    from PIL import Image

    root = Path(root)
    for sub in ("assets", "motions", "backgrounds"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    sk = humanoid_skeleton()
    for i in range(n_assets):
        save_asset(procedural_test_asset(n_gaussians, sk, seed + i), root / "assets" / f"subject{i:02d}.gsa")
    for i in range(n_motions):
        m = procedural_motion(sk, n_frames, seed + i, name=f"motion{i:02d}")
        save_motion(m, root / "motions" / f"motion{i:02d}.motion.json")
    for i in range(n_backgrounds):
        Image.fromarray(gradient_background(size, size, seed + i)).save(root / "backgrounds" / f"bg{i:02d}.png")
    cfg = {
        "sport": sport,
        "seed": seed,
        "clips": clips,
        "dictionaries": {"assets": "assets", "backgrounds": "backgrounds", "motions": "motions"},
        "output_dir": "out",
        "render": {"width": size, "height": size},
        "orbit": {"elevation_deg": [0.0, 20.0], "radius_m": [3.0, 3.5]},
        "workers": 0,
    }
    path = root / "run.yaml"
    path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    return path
