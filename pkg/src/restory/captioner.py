"""Two-prompt captioning of frame sequences.

Every frame is captioned twice: a posture prompt, then a context prompt that
chains in the posture answer and, from the second frame on, the previous
frame's context answer. Chaining makes the context captions sequential
within one video; posture prompts carry no chain and may be prefetched in
parallel.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from restory.errors import EmptyP1Answer, ProviderError, TemplateError
from restory.hashing import text_digest
from restory.ingest import FrameRecord
from restory.providers.services import CaptionService

P1_ANSWER = "{p1_answer}"
PREV_P2_ANSWER = "{prev_p2_answer}"


@dataclass(frozen=True)
class PromptTemplates:
    """The posture prompt, the chained context prompt, and its first-frame form.

    Placeholder rules are enforced here, at load time: the posture template
    carries no placeholders, the context template carries both exactly once,
    and the first-frame variant carries only the posture answer.
    """

    p1_template: str
    p2_template: str
    p2_first_frame_template: str

    def __post_init__(self) -> None:
        for name, template in (
            ("p1", self.p1_template),
            ("p2", self.p2_template),
            ("p2_first", self.p2_first_frame_template),
        ):
            if not template:
                raise TemplateError(f"template {name!r} must be non-empty")
        if P1_ANSWER in self.p1_template or PREV_P2_ANSWER in self.p1_template:
            raise TemplateError("p1 template must not contain placeholders")
        if self.p2_template.count(P1_ANSWER) != 1:
            raise TemplateError(f"p2 template needs exactly one {P1_ANSWER}")
        if self.p2_template.count(PREV_P2_ANSWER) != 1:
            raise TemplateError(f"p2 template needs exactly one {PREV_P2_ANSWER}")
        if self.p2_first_frame_template.count(P1_ANSWER) != 1:
            raise TemplateError(f"p2_first template needs exactly one {P1_ANSWER}")
        if PREV_P2_ANSWER in self.p2_first_frame_template:
            raise TemplateError(f"p2_first template must not contain {PREV_P2_ANSWER}")


DEFAULT_TEMPLATES = PromptTemplates(
    p1_template=(
        "Describe the person's posture. Focus on their head orientation and "
        "arm posture, in one or two sentences."
    ),
    p2_template=(
        "On the previous frame you answered: {prev_p2_answer}\n"
        "Given the person's posture is {p1_answer}, is the person interacting "
        "with you? How, if true, does the person interact with you?"
    ),
    p2_first_frame_template=(
        "Given the person's posture is {p1_answer}, is the person interacting "
        "with you? How, if true, does the person interact with you?"
    ),
)


def load_templates(path: Path) -> PromptTemplates:
    """Read a ``prompts.json`` file ({"p1", "p2", "p2_first"}) and validate it."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise TemplateError(f"prompts file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise TemplateError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict) or set(data) != {"p1", "p2", "p2_first"}:
        raise TemplateError(f"{path}: needs exactly the fields p1, p2, p2_first")
    if not all(isinstance(value, str) for value in data.values()):
        raise TemplateError(f"{path}: all templates must be strings")
    return PromptTemplates(
        p1_template=data["p1"],
        p2_template=data["p2"],
        p2_first_frame_template=data["p2_first"],
    )


@dataclass(frozen=True)
class FrameCaptions:
    """The pose and context captions for one frame, with provenance."""

    frame: FrameRecord
    pose_caption: str
    context_caption: str
    model_name: str
    p1_prompt_hash: str
    p2_prompt_hash: str


def render_p1(templates: PromptTemplates) -> str:
    return templates.p1_template


def render_p2(
    templates: PromptTemplates, p1_answer: str, prev_p2_answer: str | None = None
) -> str:
    if not p1_answer:
        raise EmptyP1Answer("posture answer is empty")
    if prev_p2_answer is None:
        return templates.p2_first_frame_template.replace(P1_ANSWER, p1_answer)
    return templates.p2_template.replace(P1_ANSWER, p1_answer).replace(
        PREV_P2_ANSWER, prev_p2_answer
    )


def _annotated(exc: ProviderError, frame_index: int) -> ProviderError:
    return type(exc)(f"frame {frame_index}: {exc}")


def caption_sequence(
    frames: Sequence[FrameRecord],
    templates: PromptTemplates,
    captioner: CaptionService,
    *,
    workers: int = 1,
) -> list[FrameCaptions]:
    """Caption frames in order, chaining context answers frame to frame.

    With workers > 1 the posture captions are prefetched concurrently (they
    have no chain); the context pass stays strictly sequential. Output is
    identical either way because results are keyed by frame position and the
    cache is content-addressed.
    """
    if not frames:
        raise ValueError("frames must be non-empty")
    indices = [frame.frame_index for frame in frames]
    if indices != sorted(indices):
        raise ValueError("frames must be in frame_index order")

    p1_prompt = render_p1(templates)
    p1_hash = text_digest(p1_prompt)

    pose_captions: list[str] = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(captioner.caption, frame.image_ref, p1_prompt)
                for frame in frames
            ]
            for position, future in enumerate(futures):
                try:
                    pose_captions.append(future.result())
                except ProviderError as exc:
                    raise _annotated(exc, frames[position].frame_index) from exc
    else:
        for frame in frames:
            try:
                pose_captions.append(captioner.caption(frame.image_ref, p1_prompt))
            except ProviderError as exc:
                raise _annotated(exc, frame.frame_index) from exc

    results: list[FrameCaptions] = []
    previous_context: str | None = None
    for position, frame in enumerate(frames):
        p2_prompt = render_p2(templates, pose_captions[position], previous_context)
        try:
            context_caption = captioner.caption(frame.image_ref, p2_prompt)
        except ProviderError as exc:
            raise _annotated(exc, frame.frame_index) from exc
        results.append(
            FrameCaptions(
                frame=frame,
                pose_caption=pose_captions[position],
                context_caption=context_caption,
                model_name=captioner.model_name,
                p1_prompt_hash=p1_hash,
                p2_prompt_hash=text_digest(p2_prompt),
            )
        )
        previous_context = context_caption
    return results


# --- caption store (de)serialization -----------------------------------------


def captions_to_dict(captions: FrameCaptions) -> dict:
    return {
        "frame_index": captions.frame.frame_index,
        "pose_caption": captions.pose_caption,
        "context_caption": captions.context_caption,
        "model_name": captions.model_name,
        "p1_prompt_hash": captions.p1_prompt_hash,
        "p2_prompt_hash": captions.p2_prompt_hash,
    }


def captions_from_dict(data: dict, frames: Sequence[FrameRecord]) -> FrameCaptions:
    frame = frames[data["frame_index"]]
    if frame.frame_index != data["frame_index"]:
        raise ValueError("caption store out of step with frame store")
    return FrameCaptions(
        frame=frame,
        pose_caption=data["pose_caption"],
        context_caption=data["context_caption"],
        model_name=data["model_name"],
        p1_prompt_hash=data["p1_prompt_hash"],
        p2_prompt_hash=data["p2_prompt_hash"],
    )
