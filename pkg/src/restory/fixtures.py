"""Bundled demo project with deterministic synthetic footage.

The fixture ships as a generator rather than binary assets: images are tiny
PNGs painted from a frozen palette, so every byte of the project is
reproducible. The frozen seed was chosen so that, under the mock providers,
slot 0's best input frame differs between alpha=0.2 and alpha=1.0, which the
review surface uses to demonstrate what-if recomputation.
"""

from __future__ import annotations

import json
from pathlib import Path

from PIL import Image, ImageDraw

REFERENCE_ID = "ref-demo"
VIDEO_ID = "vid-demo"
REFERENCE_SLOTS = 5
VIDEO_FRAMES = 10

# Frozen after a seed search; the slot-0 property is asserted in the tests.
FIXTURE_SEED = 0

_EGO_VERBS = (
    "the robot holds still",
    "the robot rolls forward slowly",
    "the robot turns slightly left",
    "the robot turns slightly right",
    "the robot backs up a little",
)


def _color(seed: int, index: int) -> tuple[int, int, int]:
    value = (seed * 1_000_003 + index * 7919) % 0xFFFFFF
    return (value >> 16 & 0xFF, value >> 8 & 0xFF, value & 0xFF)


def write_frame_image(path: Path, seed: int, index: int) -> None:
    """Paint a 64x48 frame: solid background plus an off-center figure block."""
    background = _color(seed, index)
    figure = _color(seed + 101, index)
    image = Image.new("RGB", (64, 48), background)
    draw = ImageDraw.Draw(image)
    x = 8 + (index * 5) % 24
    draw.rectangle([x, 12, x + 14, 40], fill=figure)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path, format="PNG")


def _write_frame_dir(
    directory: Path,
    source_id: str,
    count: int,
    *,
    seed: int,
    index_offset: int,
    step_ms: int = 500,
) -> None:
    frames = []
    for i in range(count):
        name = f"frame_{i:03d}.png"
        write_frame_image(directory / name, seed, index_offset + i)
        frames.append({"file": name, "t_ms": i * step_ms})
    ego = [_EGO_VERBS[i % len(_EGO_VERBS)] for i in range(count - 1)]
    manifest = {"id": source_id, "frames": frames, "ego_motion": ego}
    (directory / "frames.json").write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def create_fixture_project(dest: Path, *, seed: int = FIXTURE_SEED) -> Path:
    """Materialize the demo project under dest and return its root."""
    root = Path(dest)
    root.mkdir(parents=True, exist_ok=True)
    config = {
        "providers": {"vlm": "mock", "embedder": "mock", "detector": "mock"},
        "sampling": {"rate_hz": 2},
        "alignment": {
            "alpha": 0.2,
            "strategy": "greedy",
            "top_k": 5,
            "allow_frame_reuse": True,
        },
        "ego_motion_policy": "copy_reference",
        "crop_reference": True,
        "crop_input": True,
    }
    (root / "project.json").write_text(
        json.dumps(config, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    _write_frame_dir(
        root / "references" / REFERENCE_ID,
        REFERENCE_ID,
        REFERENCE_SLOTS,
        seed=seed,
        index_offset=0,
    )
    _write_frame_dir(
        root / "videos" / VIDEO_ID,
        VIDEO_ID,
        VIDEO_FRAMES,
        seed=seed,
        index_offset=100,
    )
    return root
