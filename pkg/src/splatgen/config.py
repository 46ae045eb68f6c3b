"""Run configuration, read from a YAML file.

Relative paths are resolved against the config file's directory. See
``docs/config.md`` and ``docs/run.example.yaml`` for the schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .camera import CameraError, OrbitSpec
from .render import RenderSettings

ASSET_SUFFIX = ".gsa"
MOTION_SUFFIX = ".motion.json"
BACKGROUND_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
DEFAULT_CAMERAS_PER_MOTION = 4


class ConfigError(ValueError):
    pass


def list_dictionary(directory: Path, suffixes) -> dict[str, Path]:
    """Sorted ``{id: path}`` of the files in a dictionary directory."""
    suffixes = (suffixes,) if isinstance(suffixes, str) else tuple(suffixes)
    out = {}
    for p in sorted(directory.iterdir()):
        name = p.name.lower()
        for s in suffixes:
            if p.is_file() and name.endswith(s):
                out[p.name[: -len(s)]] = p
                break
    return out


@dataclass(frozen=True)
class RunConfig:
    assets_dir: Path
    backgrounds_dir: Path
    motions_dir: Path
    output_dir: Path
    sport: str = "sport"
    seed: int = 0
    width: int = 256
    height: int = 256
    clips: int | None = None
    cameras_per_motion: int = DEFAULT_CAMERAS_PER_MOTION
    orbit: OrbitSpec = field(default_factory=OrbitSpec)
    render: RenderSettings = field(default_factory=RenderSettings)
    split_plan: dict = field(default_factory=dict)
    valid_fraction: float = 0.25
    workers: int = 0
    write_masks: bool = False
    use_motion_cameras: bool = True

    @property
    def n_clips(self) -> int:
        if self.clips is not None:
            return self.clips
        return len(self.motions()) * self.cameras_per_motion

    def assets(self) -> dict[str, Path]:
        return list_dictionary(self.assets_dir, ASSET_SUFFIX)

    def backgrounds(self) -> dict[str, Path]:
        return list_dictionary(self.backgrounds_dir, BACKGROUND_SUFFIXES)

    def motions(self) -> dict[str, Path]:
        return list_dictionary(self.motions_dir, MOTION_SUFFIX)

    def validate(self) -> None:
        for label, d, lister in (("assets", self.assets_dir, self.assets),
                                 ("backgrounds", self.backgrounds_dir, self.backgrounds),
                                 ("motions", self.motions_dir, self.motions)):
            if not d.is_dir():
                raise ConfigError(f"{label} directory {d} does not exist")
            if not lister():
                raise ConfigError(f"{label} directory {d} has no usable files")
        if self.clips is not None and self.clips <= 0:
            raise ConfigError("clips must be positive")
        if self.cameras_per_motion <= 0:
            raise ConfigError("cameras_per_motion must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("render dimensions must be positive")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        if not 0.0 <= self.valid_fraction < 1.0:
            raise ConfigError("valid_fraction must lie in [0, 1)")
        bad = {k: v for k, v in self.split_plan.items() if v not in ("train", "valid")}
        if bad:
            raise ConfigError(f"split_plan values must be train or valid: {bad}")
        try:
            self.orbit.validate()
        except CameraError as e:
            raise ConfigError(str(e)) from e

    def split_for(self, subject_id: str) -> str:
        """Planned split, else a deterministic subject-level default.

        Unplanned subjects are sorted and the last ``valid_fraction`` of them
        (at least one when there are two or more) go to ``valid``.
        """
        if subject_id in self.split_plan:
            return self.split_plan[subject_id]
        subjects = sorted(s for s in self.assets() if s not in self.split_plan)
        n_valid = int(round(self.valid_fraction * len(subjects)))
        if self.valid_fraction > 0 and len(subjects) >= 2:
            n_valid = max(1, n_valid)
        valid = set(subjects[len(subjects) - n_valid:]) if n_valid else set()
        return "valid" if subject_id in valid else "train"

    def with_overrides(self, seed: int | None = None, workers: int | None = None,
                       output_dir=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed, orbit=replace(cfg.orbit, seed=seed))
        if workers is not None:
            cfg = replace(cfg, workers=workers)
        if output_dir is not None:
            cfg = replace(cfg, output_dir=Path(output_dir))
        return cfg

    def echo(self) -> dict:
        """Path-free summary recorded in the manifest."""
        return {
            "sport": self.sport, "seed": self.seed, "width": self.width, "height": self.height,
            "clips": self.n_clips, "cameras_per_motion": self.cameras_per_motion,
            "orbit": self.orbit.to_dict(), "render": self.render.to_dict(),
            "use_motion_cameras": self.use_motion_cameras,
            "assets": sorted(self.assets()), "backgrounds": sorted(self.backgrounds()),
            "motions": sorted(self.motions()),
        }


def config_from_dict(d: dict, base_dir=".") -> RunConfig:
    base = Path(base_dir)
    try:
        dicts = d["dictionaries"]
        width = int(d.get("render", {}).get("width", 256))
        height = int(d.get("render", {}).get("height", 256))
        seed = int(d.get("seed", 0))
        render = {k: v for k, v in d.get("render", {}).items() if k not in ("width", "height")}
        orbit = OrbitSpec.from_dict(d.get("orbit", {}), seed=seed, width=width, height=height)
        return RunConfig(
            assets_dir=base / dicts["assets"],
            backgrounds_dir=base / dicts["backgrounds"],
            motions_dir=base / dicts["motions"],
            output_dir=base / d.get("output_dir", "out"),
            sport=str(d.get("sport", "sport")),
            seed=seed,
            width=width,
            height=height,
            clips=None if d.get("clips") is None else int(d["clips"]),
            cameras_per_motion=int(d.get("cameras_per_motion", DEFAULT_CAMERAS_PER_MOTION)),
            orbit=orbit,
            render=RenderSettings.from_dict(render),
            split_plan={str(k): str(v) for k, v in (d.get("split_plan") or {}).items()},
            valid_fraction=float(d.get("valid_fraction", 0.25)),
            workers=int(d.get("workers", 0)),
            write_masks=bool(d.get("write_masks", False)),
            use_motion_cameras=bool(d.get("use_motion_cameras", True)),
        )
    except (KeyError, TypeError, ValueError, CameraError) as e:
        raise ConfigError(f"invalid config: {e!r}") from e


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        d = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return config_from_dict(d, path.parent)
