"""Storyboard assembly, curation edits, and serialization.

Storyboards are immutable values: every edit returns a new storyboard with
the edit appended to its history, so human supervision stays auditable. The
JSON manifest is the single source of truth; HTML and Markdown are derived
views rendered next to it. Slot images are stored as paths relative to the
project root so manifests are byte-identical wherever the project lives.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from html import escape
from pathlib import Path
from typing import Sequence

from restory.aligner import AlignmentResult
from restory.captioner import FrameCaptions
from restory.errors import (
    IndexOutOfRange,
    InvalidTarget,
    MalformedManifest,
    MissingFrame,
    MissingImageFile,
    MissingMatrix,
    SlotCountMismatch,
)
from restory.hashing import text_digest
from restory.ingest import FrameRecord
from restory.similarity import SimilarityBreakdown, SimilarityMatrix

KINDS = ("reference", "generated", "curated")
STATUSES = ("draft", "approved")
EGO_POLICIES = ("copy_reference", "from_input_video")
EDIT_KINDS = ("swap_slots", "replace_frame", "approve")

MANIFEST_NAME = "storyboard.json"


@dataclass(frozen=True)
class StoryboardSlot:
    slot_index: int
    image: str  # path relative to the project root, POSIX separators
    content_hash: str
    pose_caption: str
    context_caption: str
    ego_motion_to_next: str | None
    breakdown: SimilarityBreakdown | None


@dataclass(frozen=True)
class CurationEdit:
    kind: str
    a: int = 0
    b: int = 0

    def __post_init__(self) -> None:
        if self.kind not in EDIT_KINDS:
            raise ValueError(f"edit kind must be one of {EDIT_KINDS}")


@dataclass(frozen=True)
class Storyboard:
    id: str
    kind: str
    status: str
    reference_storyboard_id: str | None
    input_video_id: str | None
    config_digest: str | None
    ego_motion_policy: str
    slots: tuple[StoryboardSlot, ...]
    edit_history: tuple[CurationEdit, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")
        if self.ego_motion_policy not in EGO_POLICIES:
            raise ValueError(f"ego_motion_policy must be one of {EGO_POLICIES}")
        if [slot.slot_index for slot in self.slots] != list(range(len(self.slots))):
            raise ValueError("slot indices must be contiguous from 0")
        if self.kind in ("generated", "curated") and not (
            self.reference_storyboard_id and self.input_video_id
        ):
            raise ValueError(f"{self.kind} storyboards need both provenance ids")
        if self.slots and self.slots[-1].ego_motion_to_next:
            raise ValueError("last slot must not carry ego-motion text")

    @property
    def version(self) -> int:
        return len(self.edit_history)


def storyboard_id_for(
    reference_id: str, video_id: str, config_digest: str
) -> str:
    return "sb-" + text_digest(f"{reference_id}:{video_id}:{config_digest}")[:12]


def _relative_image(record: FrameRecord, image_root: Path) -> str:
    return record.image_ref.resolve().relative_to(Path(image_root).resolve()).as_posix()


def _derive_input_ego(
    choices: Sequence[int],
    position: int,
    video_ego_motion: Sequence[str] | None,
    frame_count: int,
) -> str:
    """Join the input video's ego-motion texts spanning two chosen frames.

    Only derivable when the choices advance forward and the video carries one
    text per consecutive sampled pair; otherwise empty.
    """
    if video_ego_motion is None or len(video_ego_motion) != frame_count - 1:
        return ""
    start, end = choices[position], choices[position + 1]
    if end <= start:
        return ""
    return " ".join(video_ego_motion[start:end])


def assemble(
    reference: Storyboard,
    alignment: AlignmentResult,
    frames: Sequence[FrameRecord],
    captions: Sequence[FrameCaptions],
    *,
    image_root: Path,
    ego_motion_policy: str = "copy_reference",
    video_ego_motion: Sequence[str] | None = None,
    storyboard_id: str | None = None,
) -> Storyboard:
    """Build a generated storyboard from an alignment over the input video."""
    if ego_motion_policy not in EGO_POLICIES:
        raise ValueError(f"ego_motion_policy must be one of {EGO_POLICIES}")
    if len(alignment.slots) != len(reference.slots):
        raise SlotCountMismatch(
            f"alignment has {len(alignment.slots)} slots, "
            f"reference has {len(reference.slots)}"
        )
    if len(captions) != len(frames):
        raise MissingFrame("captions and frames stores are out of step")

    choices = [slot.frame_index for slot in alignment.slots]
    for j in choices:
        if not 0 <= j < len(frames):
            raise MissingFrame(f"alignment chose frame {j} of {len(frames)}")

    config_digest = alignment.config.digest()
    slots = []
    last = len(choices) - 1
    for position, choice in enumerate(alignment.slots):
        frame = frames[choice.frame_index]
        if position == last:
            ego: str | None = None
        elif ego_motion_policy == "copy_reference":
            ego = reference.slots[position].ego_motion_to_next
        else:
            ego = _derive_input_ego(choices, position, video_ego_motion, len(frames))
        slots.append(
            StoryboardSlot(
                slot_index=position,
                image=_relative_image(frame, image_root),
                content_hash=frame.content_hash,
                pose_caption=captions[choice.frame_index].pose_caption,
                context_caption=captions[choice.frame_index].context_caption,
                ego_motion_to_next=ego,
                breakdown=choice.breakdown,
            )
        )

    return Storyboard(
        id=storyboard_id
        or storyboard_id_for(reference.id, alignment.video_id, config_digest),
        kind="generated",
        status="draft",
        reference_storyboard_id=reference.id,
        input_video_id=alignment.video_id,
        config_digest=config_digest,
        ego_motion_policy=ego_motion_policy,
        slots=tuple(slots),
    )


def _swap_payload(slots: list[StoryboardSlot], a: int, b: int) -> None:
    payload_a = (
        slots[a].image,
        slots[a].content_hash,
        slots[a].pose_caption,
        slots[a].context_caption,
        slots[a].breakdown,
    )
    payload_b = (
        slots[b].image,
        slots[b].content_hash,
        slots[b].pose_caption,
        slots[b].context_caption,
        slots[b].breakdown,
    )
    slots[a] = replace(
        slots[a],
        image=payload_b[0],
        content_hash=payload_b[1],
        pose_caption=payload_b[2],
        context_caption=payload_b[3],
        breakdown=payload_b[4],
    )
    slots[b] = replace(
        slots[b],
        image=payload_a[0],
        content_hash=payload_a[1],
        pose_caption=payload_a[2],
        context_caption=payload_a[3],
        breakdown=payload_a[4],
    )


def apply_edit(
    storyboard: Storyboard,
    edit: CurationEdit,
    *,
    matrix: SimilarityMatrix | None = None,
    frames: Sequence[FrameRecord] | None = None,
    captions: Sequence[FrameCaptions] | None = None,
    image_root: Path | None = None,
) -> Storyboard:
    """Apply one curation edit, returning a new curated storyboard.

    Swaps exchange the frame/caption/breakdown payloads and leave slot
    indices and ego-motion text positional. Frame replacement needs the
    similarity matrix (for the refreshed breakdown) plus the input video's
    frames and captions (for the new payload).
    """
    if storyboard.kind == "reference":
        raise InvalidTarget("reference storyboards cannot be edited")
    if storyboard.status == "approved":
        raise InvalidTarget("approved storyboards cannot be edited")

    slots = list(storyboard.slots)
    if edit.kind == "swap_slots":
        for index in (edit.a, edit.b):
            if not 0 <= index < len(slots):
                raise IndexOutOfRange(f"slot {index} of {len(slots)}")
        _swap_payload(slots, edit.a, edit.b)
    elif edit.kind == "replace_frame":
        if not 0 <= edit.a < len(slots):
            raise IndexOutOfRange(f"slot {edit.a} of {len(slots)}")
        if matrix is None:
            raise MissingMatrix("replace_frame needs the similarity matrix")
        if not 0 <= edit.b < matrix.frame_count:
            raise IndexOutOfRange(f"frame {edit.b} of {matrix.frame_count}")
        if frames is None or captions is None or image_root is None:
            raise MissingFrame("replace_frame needs the input video frames")
        if edit.b >= len(frames) or edit.b >= len(captions):
            raise MissingFrame(f"frame {edit.b} not in the frame store")
        frame = frames[edit.b]
        slots[edit.a] = replace(
            slots[edit.a],
            image=_relative_image(frame, image_root),
            content_hash=frame.content_hash,
            pose_caption=captions[edit.b].pose_caption,
            context_caption=captions[edit.b].context_caption,
            breakdown=matrix.cells[edit.a][edit.b],
        )
    else:  # approve
        pass

    return replace(
        storyboard,
        kind="curated",
        status="approved" if edit.kind == "approve" else storyboard.status,
        slots=tuple(slots),
        edit_history=storyboard.edit_history + (edit,),
    )


# --- rendering ----------------------------------------------------------------


def _breakdown_to_json(breakdown: SimilarityBreakdown | None) -> dict | None:
    if breakdown is None:
        return None
    return {
        "pose_sim": breakdown.pose_sim,
        "context_sim": breakdown.context_sim,
        "weighted_sim": breakdown.weighted_sim,
        "alpha": breakdown.alpha,
    }


def storyboard_to_json(storyboard: Storyboard) -> dict:
    return {
        "id": storyboard.id,
        "kind": storyboard.kind,
        "status": storyboard.status,
        "reference_storyboard_id": storyboard.reference_storyboard_id,
        "input_video_id": storyboard.input_video_id,
        "config_digest": storyboard.config_digest,
        "ego_motion_policy": storyboard.ego_motion_policy,
        "slots": [
            {
                "slot_index": slot.slot_index,
                "image": slot.image,
                "content_hash": slot.content_hash,
                "pose_caption": slot.pose_caption,
                "context_caption": slot.context_caption,
                "ego_motion_to_next": slot.ego_motion_to_next,
                "breakdown": _breakdown_to_json(slot.breakdown),
            }
            for slot in storyboard.slots
        ],
        "edit_history": [
            {"kind": edit.kind, "a": edit.a, "b": edit.b}
            for edit in storyboard.edit_history
        ],
    }


def _check_images(storyboard: Storyboard, image_root: Path) -> None:
    for slot in storyboard.slots:
        if not (Path(image_root) / slot.image).is_file():
            raise MissingImageFile(slot.image)


def _html_src(slot: StoryboardSlot, image_root: Path, out_dir: Path) -> str:
    absolute = (Path(image_root) / slot.image).resolve()
    return Path(os.path.relpath(absolute, Path(out_dir).resolve())).as_posix()


def _render_html(storyboard: Storyboard, image_root: Path, out_dir: Path) -> str:
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8">',
        f"<title>Storyboard {escape(storyboard.id)}</title>",
        "<style>body{font-family:sans-serif;max-width:56rem;margin:2rem auto}"
        ".slot{margin-bottom:1.5rem}.slot img{max-width:100%;border:1px solid #999}"
        ".ego{color:#555;font-style:italic;margin:0.75rem 0}"
        ".meta{color:#777;font-size:0.85rem}</style>",
        "</head><body>",
        f"<h1>Storyboard {escape(storyboard.id)}</h1>",
        f'<p class="meta">kind: {escape(storyboard.kind)} · status: '
        f"{escape(storyboard.status)}</p>",
    ]
    for slot in storyboard.slots:
        parts.append('<div class="slot">')
        parts.append(f"<h2>Slot {slot.slot_index}</h2>")
        parts.append(
            f'<img src="{escape(_html_src(slot, image_root, out_dir), quote=True)}" '
            f'alt="slot {slot.slot_index}">'
        )
        parts.append(f"<p><strong>Pose:</strong> {escape(slot.pose_caption)}</p>")
        parts.append(
            f"<p><strong>Context:</strong> {escape(slot.context_caption)}</p>"
        )
        if slot.breakdown is not None:
            b = slot.breakdown
            parts.append(
                f'<p class="meta">pose {b.pose_sim:.4f} · context '
                f"{b.context_sim:.4f} · weighted {b.weighted_sim:.4f} "
                f"(α={b.alpha:.4f})</p>"
            )
        parts.append("</div>")
        if slot.ego_motion_to_next:
            parts.append(f'<p class="ego">→ {escape(slot.ego_motion_to_next)}</p>')
    parts.append("</body></html>")
    return "\n".join(parts) + "\n"


def _render_markdown(storyboard: Storyboard, image_root: Path, out_dir: Path) -> str:
    lines = [f"# Storyboard {storyboard.id}", ""]
    lines.append(f"kind: {storyboard.kind} · status: {storyboard.status}")
    lines.append("")
    for slot in storyboard.slots:
        lines.append(f"## Slot {slot.slot_index}")
        lines.append("")
        lines.append(f"![slot {slot.slot_index}]({_html_src(slot, image_root, out_dir)})")
        lines.append("")
        lines.append(f"- pose: {slot.pose_caption}")
        lines.append(f"- context: {slot.context_caption}")
        if slot.breakdown is not None:
            lines.append(f"- weighted similarity: {slot.breakdown.weighted_sim:.4f}")
        lines.append("")
        if slot.ego_motion_to_next:
            lines.append(f"> {slot.ego_motion_to_next}")
            lines.append("")
    return "\n".join(lines)


def render(
    storyboard: Storyboard,
    fmt: str,
    out_dir: Path,
    *,
    image_root: Path,
) -> list[Path]:
    """Write the requested rendering into out_dir and return the file paths."""
    if fmt not in ("manifest", "html", "markdown"):
        raise ValueError(f"unknown format {fmt!r}")
    _check_images(storyboard, image_root)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "manifest":
        path = out_dir / MANIFEST_NAME
        text = json.dumps(storyboard_to_json(storyboard), ensure_ascii=False, indent=2)
        path.write_text(text + "\n", encoding="utf-8")
        return [path]
    if fmt == "html":
        path = out_dir / "storyboard.html"
        path.write_text(_render_html(storyboard, image_root, out_dir), encoding="utf-8")
        return [path]
    path = out_dir / "storyboard.md"
    path.write_text(_render_markdown(storyboard, image_root, out_dir), encoding="utf-8")
    return [path]


# --- parsing ------------------------------------------------------------------

_TOP_FIELDS = {
    "id",
    "kind",
    "status",
    "reference_storyboard_id",
    "input_video_id",
    "config_digest",
    "ego_motion_policy",
    "slots",
    "edit_history",
}
_SLOT_FIELDS = {
    "slot_index",
    "image",
    "content_hash",
    "pose_caption",
    "context_caption",
    "ego_motion_to_next",
    "breakdown",
}
_BREAKDOWN_FIELDS = {"pose_sim", "context_sim", "weighted_sim", "alpha"}


def _parse_breakdown(data: object) -> SimilarityBreakdown | None:
    if data is None:
        return None
    if not isinstance(data, dict) or set(data) != _BREAKDOWN_FIELDS:
        raise MalformedManifest("breakdown must have exactly the four similarity fields")
    return SimilarityBreakdown(
        pose_sim=float(data["pose_sim"]),
        context_sim=float(data["context_sim"]),
        weighted_sim=float(data["weighted_sim"]),
        alpha=float(data["alpha"]),
    )


def parse_manifest(path: Path) -> Storyboard:
    """Read a storyboard manifest back into a value; inverse of render(manifest)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise MalformedManifest(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict) or set(data) != _TOP_FIELDS:
        raise MalformedManifest(f"{path}: manifest fields do not match the schema")
    if not isinstance(data["slots"], list):
        raise MalformedManifest(f"{path}: slots must be a list")

    slots = []
    for entry in data["slots"]:
        if not isinstance(entry, dict) or set(entry) != _SLOT_FIELDS:
            raise MalformedManifest(f"{path}: slot fields do not match the schema")
        slots.append(
            StoryboardSlot(
                slot_index=entry["slot_index"],
                image=entry["image"],
                content_hash=entry["content_hash"],
                pose_caption=entry["pose_caption"],
                context_caption=entry["context_caption"],
                ego_motion_to_next=entry["ego_motion_to_next"],
                breakdown=_parse_breakdown(entry["breakdown"]),
            )
        )
    edits = []
    for entry in data["edit_history"]:
        if not isinstance(entry, dict) or set(entry) != {"kind", "a", "b"}:
            raise MalformedManifest(f"{path}: edit entries must have kind, a, b")
        try:
            edits.append(CurationEdit(kind=entry["kind"], a=entry["a"], b=entry["b"]))
        except ValueError as exc:
            raise MalformedManifest(f"{path}: {exc}") from exc

    try:
        return Storyboard(
            id=data["id"],
            kind=data["kind"],
            status=data["status"],
            reference_storyboard_id=data["reference_storyboard_id"],
            input_video_id=data["input_video_id"],
            config_digest=data["config_digest"],
            ego_motion_policy=data["ego_motion_policy"],
            slots=tuple(slots),
            edit_history=tuple(edits),
        )
    except (ValueError, TypeError) as exc:
        raise MalformedManifest(f"{path}: {exc}") from exc
