"""Turn raw footage into an ordered, person-cropped frame sequence.

The canonical input is a frame directory with a ``frames.json`` manifest;
container formats are decoded to that layout by an external transcoder (see
`cli.import_video`). Sampling picks, for each grid time k/rate, the source
frame nearest in time, always adding the footage's final moment as a target
so short tails are represented; consecutive duplicates collapse to one
record.
"""

from __future__ import annotations

import bisect
import io
import json
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from PIL import Image, UnidentifiedImageError

from restory.errors import (
    DecodeError,
    EmptyVideo,
    MalformedManifest,
    MissingImageFile,
)
from restory.hashing import sha256_hex
from restory.providers.base import Detection
from restory.providers.services import DetectionService

MANIFEST_NAME = "frames.json"


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling rate in frames per second; exact rational arithmetic."""

    rate_hz: Fraction = Fraction(2)

    def __post_init__(self) -> None:
        rate = Fraction(self.rate_hz)
        if rate <= 0:
            raise ValueError("rate_hz must be > 0")
        object.__setattr__(self, "rate_hz", rate)


@dataclass(frozen=True)
class FrameRecord:
    """One sampled, optionally person-cropped image."""

    video_id: str
    frame_index: int
    timestamp_ms: int
    image_ref: Path
    content_hash: str
    crop_box: tuple[int, int, int, int] | None = None
    person_detected: bool = False


@dataclass(frozen=True)
class SourceVideo:
    id: str
    frame_entries: tuple[tuple[Path, int], ...]
    ego_motion: tuple[str, ...]
    duration_ms: int


def _load_json_rejecting_duplicates(path: Path) -> dict:
    def check_pairs(pairs: list[tuple[str, object]]) -> dict:
        result: dict = {}
        for key, value in pairs:
            if key in result:
                raise MalformedManifest(f"{path}: duplicate field {key!r}")
            result[key] = value
        return result

    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise MalformedManifest(f"manifest not found: {path}") from exc
    try:
        data = json.loads(text, object_pairs_hook=check_pairs)
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise MalformedManifest(f"{path}: top level must be an object")
    return data


def load_frame_dir(path: Path) -> SourceVideo:
    """Read a frame directory's manifest into a SourceVideo.

    Raises MalformedManifest for missing/duplicate/unknown fields or
    non-monotone timestamps, and MissingImageFile for dangling references.
    """
    directory = Path(path)
    data = _load_json_rejecting_duplicates(directory / MANIFEST_NAME)

    unknown = set(data) - {"id", "frames", "ego_motion"}
    if unknown:
        raise MalformedManifest(f"unknown manifest fields: {sorted(unknown)}")
    video_id = data.get("id")
    frames = data.get("frames")
    ego_motion = data.get("ego_motion", [])
    if not isinstance(video_id, str) or not video_id:
        raise MalformedManifest("manifest field 'id' must be a non-empty string")
    if not isinstance(frames, list):
        raise MalformedManifest("manifest field 'frames' must be a list")
    if not isinstance(ego_motion, list) or not all(
        isinstance(item, str) for item in ego_motion
    ):
        raise MalformedManifest("manifest field 'ego_motion' must be a list of strings")

    entries: list[tuple[Path, int]] = []
    previous_ts: int | None = None
    for position, frame in enumerate(frames):
        if not isinstance(frame, dict) or set(frame) != {"file", "t_ms"}:
            raise MalformedManifest(
                f"frame entry {position} must have exactly the fields 'file' and 't_ms'"
            )
        file_name = frame["file"]
        t_ms = frame["t_ms"]
        if not isinstance(file_name, str) or not file_name:
            raise MalformedManifest(f"frame entry {position}: 'file' must be a string")
        if isinstance(t_ms, bool) or not isinstance(t_ms, int) or t_ms < 0:
            raise MalformedManifest(
                f"frame entry {position}: 't_ms' must be a non-negative integer"
            )
        if previous_ts is not None and t_ms <= previous_ts:
            raise MalformedManifest(
                f"frame entry {position}: timestamp {t_ms} not strictly increasing"
            )
        previous_ts = t_ms
        image_path = directory / file_name
        if not image_path.is_file():
            raise MissingImageFile(str(image_path))
        entries.append((image_path, t_ms))

    duration_ms = entries[-1][1] if entries else 0
    return SourceVideo(
        id=video_id,
        frame_entries=tuple(entries),
        ego_motion=tuple(ego_motion),
        duration_ms=duration_ms,
    )


def _nearest_entry(timestamps: Sequence[int], target_ms: Fraction) -> int:
    """Index of the entry nearest to target; ties resolve to the earlier one."""
    pos = bisect.bisect_left(timestamps, target_ms)
    if pos == 0:
        return 0
    if pos == len(timestamps):
        return len(timestamps) - 1
    if target_ms - timestamps[pos - 1] <= timestamps[pos] - target_ms:
        return pos - 1
    return pos


def sampling_targets_ms(duration_ms: int, rate_hz: Fraction) -> list[Fraction]:
    """Grid times k/rate up to the duration, plus the final moment itself."""
    step_ms = Fraction(1000) / rate_hz
    targets: list[Fraction] = []
    k = 0
    while k * step_ms <= duration_ms:
        targets.append(k * step_ms)
        k += 1
    if not targets or targets[-1] != duration_ms:
        targets.append(Fraction(duration_ms))
    return targets


def sample_frames(video: SourceVideo, cfg: SamplingConfig) -> list[FrameRecord]:
    """Pick the nearest source frame for each sampling target.

    Deterministic: ties go to the earlier entry and consecutive duplicate
    picks collapse, so identical inputs always yield identical records.
    """
    if not video.frame_entries:
        raise EmptyVideo(f"video {video.id!r} has no frame entries")
    timestamps = [t for _, t in video.frame_entries]

    chosen: list[int] = []
    for target in sampling_targets_ms(video.duration_ms, cfg.rate_hz):
        index = _nearest_entry(timestamps, target)
        if not chosen or chosen[-1] != index:
            chosen.append(index)

    records = []
    for frame_index, entry_index in enumerate(chosen):
        image_path, t_ms = video.frame_entries[entry_index]
        try:
            content_hash = sha256_hex(image_path.read_bytes())
        except FileNotFoundError as exc:
            raise MissingImageFile(str(image_path)) from exc
        records.append(
            FrameRecord(
                video_id=video.id,
                frame_index=frame_index,
                timestamp_ms=t_ms,
                image_ref=image_path,
                content_hash=content_hash,
            )
        )
    return records


def take_all_frames(video: SourceVideo) -> list[FrameRecord]:
    """One record per source entry, unsampled; used for reference storyboards."""
    if not video.frame_entries:
        raise EmptyVideo(f"video {video.id!r} has no frame entries")
    records = []
    for frame_index, (image_path, t_ms) in enumerate(video.frame_entries):
        try:
            content_hash = sha256_hex(image_path.read_bytes())
        except FileNotFoundError as exc:
            raise MissingImageFile(str(image_path)) from exc
        records.append(
            FrameRecord(
                video_id=video.id,
                frame_index=frame_index,
                timestamp_ms=t_ms,
                image_ref=image_path,
                content_hash=content_hash,
            )
        )
    return records


def _pick_detection(detections: Sequence[Detection]) -> Detection:
    # highest confidence, then largest area, then leftmost
    return sorted(detections, key=lambda d: (-d.confidence, -d.area, d.x))[0]


def _clamp_box(
    box: Detection, width: int, height: int
) -> tuple[int, int, int, int] | None:
    x = max(0, box.x)
    y = max(0, box.y)
    w = min(box.width - (x - box.x), width - x)
    h = min(box.height - (y - box.y), height - y)
    if w <= 0 or h <= 0:
        return None
    return (x, y, w, h)


def detect_and_crop(frame: FrameRecord, detector: DetectionService) -> FrameRecord:
    """Crop the frame to its best person detection, if any.

    The cropped PNG is stored alongside the original as
    ``<content_hash>.crop.png`` (hash of the source frame); the returned
    record points at the crop and carries the crop's own content hash.
    Frames with no usable detection come back unchanged, flagged
    person_detected=False, so alignment candidates are never silently
    dropped.
    """
    detections = detector.detect(frame.image_ref)
    image_bytes = frame.image_ref.read_bytes()
    try:
        with Image.open(io.BytesIO(image_bytes)) as image:
            image.load()
            width, height = image.size
            if not detections:
                return replace(frame, person_detected=False, crop_box=None)
            box = _clamp_box(_pick_detection(detections), width, height)
            if box is None:
                return replace(frame, person_detected=False, crop_box=None)
            x, y, w, h = box
            cropped = image.crop((x, y, x + w, y + h))
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"cannot decode image {frame.image_ref}") from exc

    crop_path = frame.image_ref.parent / f"{frame.content_hash}.crop.png"
    buffer = io.BytesIO()
    cropped.save(buffer, format="PNG")
    crop_bytes = buffer.getvalue()
    if not crop_path.exists() or crop_path.read_bytes() != crop_bytes:
        crop_path.write_bytes(crop_bytes)
    return replace(
        frame,
        image_ref=crop_path,
        content_hash=sha256_hex(crop_bytes),
        crop_box=box,
        person_detected=True,
    )


# --- frame store (de)serialization -------------------------------------------


def record_to_dict(record: FrameRecord, base: Path) -> dict:
    return {
        "video_id": record.video_id,
        "frame_index": record.frame_index,
        "timestamp_ms": record.timestamp_ms,
        "image": record.image_ref.relative_to(base).as_posix(),
        "content_hash": record.content_hash,
        "crop_box": list(record.crop_box) if record.crop_box else None,
        "person_detected": record.person_detected,
    }


def record_from_dict(data: dict, base: Path) -> FrameRecord:
    return FrameRecord(
        video_id=data["video_id"],
        frame_index=data["frame_index"],
        timestamp_ms=data["timestamp_ms"],
        image_ref=base / data["image"],
        content_hash=data["content_hash"],
        crop_box=tuple(data["crop_box"]) if data.get("crop_box") else None,
        person_detected=data["person_detected"],
    )
