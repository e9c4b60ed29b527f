from __future__ import annotations

import json
from pathlib import Path

import pytest

from restory.captioner import (
    DEFAULT_TEMPLATES,
    PromptTemplates,
    caption_sequence,
    load_templates,
    render_p1,
    render_p2,
)
from restory.errors import EmptyP1Answer, ProviderUnavailable, TemplateError
from restory.hashing import sha256_hex
from restory.ingest import FrameRecord
from restory.providers import CaptionService, DiskCache, MockCaptionBackend

from conftest import write_png

VALID = dict(
    p1_template="Posture?",
    p2_template="Prev: {prev_p2_answer}. Pose: {p1_answer}. Interacting?",
    p2_first_frame_template="Pose: {p1_answer}. Interacting?",
)


# --- templates -------------------------------------------------------------


def test_default_templates_carry_posture_phrase() -> None:
    assert "Describe the person's posture" in render_p1(DEFAULT_TEMPLATES)


def test_custom_p1_is_identity() -> None:
    templates = PromptTemplates(**{**VALID, "p1_template": "Posture?"})
    assert render_p1(templates) == "Posture?"


@pytest.mark.parametrize(
    "override",
    [
        {"p1_template": "stray {p1_answer}"},
        {"p1_template": "stray {prev_p2_answer}"},
        {"p2_template": "no placeholders"},
        {"p2_template": "only {p1_answer}"},
        {"p2_template": "{p1_answer} {p1_answer} {prev_p2_answer}"},
        {"p2_first_frame_template": "nothing"},
        {"p2_first_frame_template": "{p1_answer} and {prev_p2_answer}"},
        {"p1_template": ""},
    ],
)
def test_template_validation(override: dict) -> None:
    with pytest.raises(TemplateError):
        PromptTemplates(**{**VALID, **override})


def test_load_templates(tmp_path: Path) -> None:
    path = tmp_path / "prompts.json"
    path.write_text(
        json.dumps(
            {
                "p1": "Posture?",
                "p2": "Prev {prev_p2_answer} / {p1_answer}?",
                "p2_first": "{p1_answer}?",
            }
        )
    )
    templates = load_templates(path)
    assert templates.p1_template == "Posture?"
    with pytest.raises(TemplateError):
        load_templates(tmp_path / "missing.json")
    path.write_text(json.dumps({"p1": "x"}))
    with pytest.raises(TemplateError):
        load_templates(path)


# --- render_p2 --------------------------------------------------------------


def test_render_p2_first_frame() -> None:
    templates = PromptTemplates(**VALID)
    rendered = render_p2(templates, "arms crossed", None)
    assert "arms crossed" in rendered
    assert "Prev:" not in rendered
    assert "{prev_p2_answer}" not in rendered


def test_render_p2_chains_both_answers() -> None:
    templates = PromptTemplates(**VALID)
    rendered = render_p2(templates, "waving", "The person is approaching.")
    assert "waving" in rendered
    assert "The person is approaching." in rendered


def test_render_p2_empty_p1() -> None:
    templates = PromptTemplates(**VALID)
    with pytest.raises(EmptyP1Answer):
        render_p2(templates, "", None)


# --- caption_sequence --------------------------------------------------------


class RecordingBackend(MockCaptionBackend):
    """Mock that also records (image hash, prompt) per call."""

    def __init__(self) -> None:
        super().__init__()
        self.seen: list[tuple[str, str]] = []

    def complete(self, image_bytes: bytes, prompt: str) -> str:
        self.seen.append((sha256_hex(image_bytes), prompt))
        return super().complete(image_bytes, prompt)


class FailingBackend(RecordingBackend):
    def __init__(self, fail_on_call: int) -> None:
        super().__init__()
        self.fail_on_call = fail_on_call

    def complete(self, image_bytes: bytes, prompt: str) -> str:
        if len(self.seen) + 1 == self.fail_on_call:
            self.seen.append((sha256_hex(image_bytes), prompt))
            raise ProviderUnavailable("injected failure")
        return super().complete(image_bytes, prompt)


def _frames(tmp_path: Path, count: int) -> list[FrameRecord]:
    frames = []
    for index in range(count):
        image = write_png(tmp_path / f"f{index}.png", marker=index)
        frames.append(
            FrameRecord(
                video_id="vid-a",
                frame_index=index,
                timestamp_ms=index * 500,
                image_ref=image,
                content_hash=sha256_hex(image.read_bytes()),
            )
        )
    return frames


def _service(backend, cache) -> CaptionService:
    return CaptionService(backend, "mock-vlm", cache)


def test_single_frame_two_calls(tmp_path: Path, cache: DiskCache) -> None:
    backend = RecordingBackend()
    templates = PromptTemplates(**VALID)
    results = caption_sequence(_frames(tmp_path, 1), templates, _service(backend, cache))
    assert len(results) == 1
    assert backend.calls == 2
    assert results[0].pose_caption.startswith("MOCKCAP:")
    assert results[0].context_caption.startswith("MOCKCAP:")


def test_three_frames_six_calls_and_chaining(tmp_path: Path, cache: DiskCache) -> None:
    backend = RecordingBackend()
    templates = PromptTemplates(**VALID)
    frames = _frames(tmp_path, 3)
    results = caption_sequence(frames, templates, _service(backend, cache))
    assert backend.calls == 6
    assert [captions.frame.frame_index for captions in results] == [0, 1, 2]
    p2_prompts = [prompt for _, prompt in backend.seen if prompt != "Posture?"]
    assert len(p2_prompts) == 3
    # the second frame's context prompt embeds the first frame's context answer
    assert results[0].context_caption in p2_prompts[1]
    assert results[1].context_caption in p2_prompts[2]
    # the first frame's context prompt carries no previous-answer content
    assert p2_prompts[0] == render_p2(templates, results[0].pose_caption, None)


def test_failure_annotated_with_frame_index(tmp_path: Path, cache: DiskCache) -> None:
    # call order: P1 x3, then P2 f0, P2 f1 (5th call) fails
    backend = FailingBackend(fail_on_call=5)
    templates = PromptTemplates(**VALID)
    frames = _frames(tmp_path, 3)
    with pytest.raises(ProviderUnavailable, match="frame 1"):
        caption_sequence(frames, templates, _service(backend, cache))

    # retry with the same cache: frame 0 performs zero new calls
    retry_backend = RecordingBackend()
    results = caption_sequence(frames, templates, _service(retry_backend, cache))
    assert len(results) == 3
    frame0_hash = frames[0].content_hash
    assert all(image_hash != frame0_hash for image_hash, _ in retry_backend.seen)
    assert retry_backend.calls == 2  # only the two missing context captions


def test_sequence_rejects_unordered_frames(tmp_path: Path, cache: DiskCache) -> None:
    frames = list(reversed(_frames(tmp_path, 2)))
    with pytest.raises(ValueError):
        caption_sequence(frames, PromptTemplates(**VALID), _service(MockCaptionBackend(), cache))
    with pytest.raises(ValueError):
        caption_sequence([], PromptTemplates(**VALID), _service(MockCaptionBackend(), cache))


def test_workers_match_sequential(tmp_path: Path, cache: DiskCache) -> None:
    templates = PromptTemplates(**VALID)
    frames = _frames(tmp_path, 4)
    sequential = caption_sequence(
        frames, templates, _service(MockCaptionBackend(), DiskCache(tmp_path / "c1"))
    )
    parallel = caption_sequence(
        frames,
        templates,
        _service(MockCaptionBackend(), DiskCache(tmp_path / "c2")),
        workers=3,
    )
    assert [
        (c.pose_caption, c.context_caption, c.p1_prompt_hash, c.p2_prompt_hash)
        for c in sequential
    ] == [
        (c.pose_caption, c.context_caption, c.p1_prompt_hash, c.p2_prompt_hash)
        for c in parallel
    ]


def test_prompt_hashes_recorded(tmp_path: Path, cache: DiskCache) -> None:
    from restory.hashing import text_digest

    templates = PromptTemplates(**VALID)
    frames = _frames(tmp_path, 2)
    results = caption_sequence(frames, templates, _service(MockCaptionBackend(), cache))
    assert results[0].p1_prompt_hash == text_digest("Posture?")
    expected_p2 = render_p2(templates, results[1].pose_caption, results[0].context_caption)
    assert results[1].p2_prompt_hash == text_digest(expected_p2)
