from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import pytest
from PIL import Image, ImageDraw

from restory.providers import DiskCache


def write_png(
    path: Path,
    color: tuple[int, int, int] = (200, 30, 40),
    size: tuple[int, int] = (64, 48),
    marker: int = 0,
) -> Path:
    """Write a small deterministic PNG; marker varies the pixel content."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image = Image.new("RGB", size, color)
    draw = ImageDraw.Draw(image)
    x = 4 + (marker * 3) % max(4, size[0] - 16)
    draw.rectangle([x, 4, x + 8, size[1] - 4], fill=(255 - color[0], color[1], 90))
    image.save(path, format="PNG")
    return path


def make_frame_dir(
    directory: Path,
    video_id: str,
    timestamps: Sequence[int],
    *,
    ego_motion: Sequence[str] | None = None,
    size: tuple[int, int] = (64, 48),
) -> Path:
    """Create a frame directory with a frames.json manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frames = []
    for index, t_ms in enumerate(timestamps):
        name = f"frame_{index:03d}.png"
        write_png(directory / name, color=(40 + index * 13 % 200, 80, 120), size=size, marker=index)
        frames.append({"file": name, "t_ms": t_ms})
    manifest = {
        "id": video_id,
        "frames": frames,
        "ego_motion": list(ego_motion) if ego_motion is not None else [],
    }
    (directory / "frames.json").write_text(json.dumps(manifest), encoding="utf-8")
    return directory


@pytest.fixture
def cache(tmp_path: Path) -> DiskCache:
    return DiskCache(tmp_path / "cache")
