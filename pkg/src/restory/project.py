"""Project layout, configuration, and the staged pipeline.

A project is a directory:

    project.json        configuration (providers, sampling, alignment, policy)
    prompts.json        optional prompt templates (defaults ship with the tool)
    references/<id>/    reference storyboard frame dirs (frames.json + images)
    videos/<id>/        input footage frame dirs
    cache/              on-disk provider response cache
    store/              pipeline outputs: frames, captions, alignments,
                        storyboards

Stage outputs are persisted and reused, so reruns with a warm cache perform
zero provider calls and every stage is idempotent.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from restory import aligner as aligner_mod
from restory import captioner as captioner_mod
from restory import ingest as ingest_mod
from restory import similarity as similarity_mod
from restory import storyboard as storyboard_mod
from restory.aligner import AlignmentConfig, AlignmentResult
from restory.captioner import (
    DEFAULT_TEMPLATES,
    FrameCaptions,
    PromptTemplates,
    load_templates,
)
from restory.errors import ConfigError, InvalidProject, MalformedManifest
from restory.hashing import text_digest
from restory.ingest import FrameRecord, SamplingConfig, SourceVideo
from restory.providers import (
    MOCK_DETECTOR_MODEL,
    MOCK_EMBEDDER_MODEL,
    MOCK_VLM_MODEL,
    CaptionService,
    DetectionService,
    DiskCache,
    EmbeddingService,
    HttpCaptionBackend,
    HttpDetectionBackend,
    HttpEmbeddingBackend,
    MockCaptionBackend,
    MockDetectionBackend,
    MockEmbeddingBackend,
    ProviderConfig,
)
from restory.similarity import SimilarityMatrix
from restory.storyboard import Storyboard

log = logging.getLogger(__name__)

PROJECT_CONFIG_NAME = "project.json"
PROVIDER_ROLES = ("vlm", "embedder", "detector")


@dataclass(frozen=True)
class ProjectConfig:
    root: Path
    providers: dict
    sampling: SamplingConfig
    alignment: AlignmentConfig
    prompts_path: Path | None
    ego_motion_policy: str
    crop_reference: bool = True
    crop_input: bool = True
    workers: int = 1


def _parse_rate(value: object) -> Fraction:
    try:
        if isinstance(value, str):
            return Fraction(value)
        if isinstance(value, (int, float)):
            return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid sampling rate: {value!r}") from exc
    raise ConfigError(f"invalid sampling rate: {value!r}")


def load_project_config(root: Path) -> ProjectConfig:
    root = Path(root).resolve()
    config_path = root / PROJECT_CONFIG_NAME
    if not config_path.is_file():
        raise InvalidProject(f"no {PROJECT_CONFIG_NAME} in {root}")
    try:
        data = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidProject(f"{config_path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InvalidProject(f"{config_path}: top level must be an object")
    unknown = set(data) - {
        "providers",
        "sampling",
        "alignment",
        "prompts",
        "ego_motion_policy",
        "crop_reference",
        "crop_input",
        "workers",
    }
    if unknown:
        raise ConfigError(f"unknown project config fields: {sorted(unknown)}")

    providers = data.get("providers", {})
    if not isinstance(providers, dict):
        raise ConfigError("'providers' must be an object")
    parsed_providers: dict = {}
    for role in PROVIDER_ROLES:
        entry = providers.get(role, "mock")
        if entry == "mock":
            parsed_providers[role] = "mock"
        elif isinstance(entry, dict):
            parsed_providers[role] = ProviderConfig.from_dict(entry)
        else:
            raise ConfigError(f"provider {role!r} must be 'mock' or a config object")

    sampling_data = data.get("sampling", {})
    rate = _parse_rate(sampling_data.get("rate_hz", 2)) if isinstance(
        sampling_data, dict
    ) else None
    if rate is None:
        raise ConfigError("'sampling' must be an object")
    try:
        sampling = SamplingConfig(rate_hz=rate)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    alignment_data = data.get("alignment", {})
    if not isinstance(alignment_data, dict):
        raise ConfigError("'alignment' must be an object")
    try:
        alignment = AlignmentConfig(**alignment_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid alignment config: {exc}") from exc

    prompts_path: Path | None = None
    if "prompts" in data and data["prompts"] is not None:
        prompts_path = root / data["prompts"]
        if not prompts_path.is_file():
            raise InvalidProject(f"prompts file not found: {prompts_path}")

    policy = data.get("ego_motion_policy", "copy_reference")
    if policy not in storyboard_mod.EGO_POLICIES:
        raise ConfigError(f"ego_motion_policy must be one of {storyboard_mod.EGO_POLICIES}")

    return ProjectConfig(
        root=root,
        providers=parsed_providers,
        sampling=sampling,
        alignment=alignment,
        prompts_path=prompts_path,
        ego_motion_policy=policy,
        crop_reference=bool(data.get("crop_reference", True)),
        crop_input=bool(data.get("crop_input", True)),
        workers=int(data.get("workers", 1)),
    )


@dataclass
class ProviderSet:
    captioner: CaptionService
    embedder: EmbeddingService
    detector: DetectionService


def build_providers(cfg: ProjectConfig, cache: DiskCache) -> ProviderSet:
    vlm = cfg.providers["vlm"]
    embedder = cfg.providers["embedder"]
    detector = cfg.providers["detector"]

    if vlm == "mock":
        caption_service = CaptionService(MockCaptionBackend(), MOCK_VLM_MODEL, cache)
    else:
        caption_service = CaptionService(HttpCaptionBackend(vlm), vlm.model_name, cache)
    if embedder == "mock":
        embed_service = EmbeddingService(
            MockEmbeddingBackend(), MOCK_EMBEDDER_MODEL, cache
        )
    else:
        embed_service = EmbeddingService(
            HttpEmbeddingBackend(embedder), embedder.model_name, cache
        )
    if detector == "mock":
        detect_service = DetectionService(
            MockDetectionBackend(), MOCK_DETECTOR_MODEL, cache
        )
    else:
        detect_service = DetectionService(
            HttpDetectionBackend(detector), detector.model_name, cache
        )
    return ProviderSet(
        captioner=caption_service, embedder=embed_service, detector=detect_service
    )


@dataclass(frozen=True)
class GenerateOutcome:
    storyboard: Storyboard
    reference: Storyboard
    alignment: AlignmentResult
    matrix: SimilarityMatrix
    alignment_id: str
    manifest_path: Path
    html_path: Path


@dataclass
class Project:
    """Loaded project: configuration, providers, and persisted stage stores."""

    config: ProjectConfig
    providers: ProviderSet = field(init=False)

    def __post_init__(self) -> None:
        self.providers = build_providers(self.config, DiskCache(self.cache_dir))
        self._templates: PromptTemplates | None = None

    # --- paths ---------------------------------------------------------------

    @property
    def root(self) -> Path:
        return self.config.root

    @property
    def cache_dir(self) -> Path:
        return self.root / "cache"

    @property
    def store_dir(self) -> Path:
        return self.root / "store"

    def source_dir(self, namespace: str, source_id: str) -> Path:
        return self.root / namespace / source_id

    def frames_store(self, namespace: str, source_id: str) -> Path:
        return self.store_dir / "frames" / namespace / f"{source_id}.json"

    def captions_store(self, namespace: str, source_id: str) -> Path:
        return self.store_dir / "captions" / namespace / f"{source_id}.json"

    def alignment_store(self, alignment_id: str) -> Path:
        return self.store_dir / "alignments" / f"{alignment_id}.json"

    def storyboard_dir(self, storyboard_id: str) -> Path:
        return self.store_dir / "storyboards" / storyboard_id

    # --- configuration -------------------------------------------------------

    @property
    def templates(self) -> PromptTemplates:
        if self._templates is None:
            if self.config.prompts_path is not None:
                self._templates = load_templates(self.config.prompts_path)
            else:
                self._templates = DEFAULT_TEMPLATES
        return self._templates

    def resolve_namespace(self, source_id: str) -> str:
        """Find whether an id names a reference storyboard or an input video."""
        is_reference = (self.source_dir("references", source_id) / "frames.json").is_file()
        is_video = (self.source_dir("videos", source_id) / "frames.json").is_file()
        if is_reference and is_video:
            raise ConfigError(f"id {source_id!r} exists in both namespaces")
        if is_reference:
            return "references"
        if is_video:
            return "videos"
        raise InvalidProject(f"no frame directory for id {source_id!r}")

    def load_source(self, namespace: str, source_id: str) -> SourceVideo:
        return ingest_mod.load_frame_dir(self.source_dir(namespace, source_id))

    # --- ingest --------------------------------------------------------------

    def _write_json(self, path: Path, payload: object) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )

    def ingest(
        self, source_id: str, *, rate_hz: Fraction | None = None, force: bool = False
    ) -> list[FrameRecord]:
        """Sample (videos) or take verbatim (references), then person-crop."""
        namespace = self.resolve_namespace(source_id)
        store_path = self.frames_store(namespace, source_id)
        if store_path.is_file() and not force:
            log.debug("frames store hit for %s", source_id)
            return self.load_frames(namespace, source_id)

        video = self.load_source(namespace, source_id)
        if namespace == "videos":
            sampling = (
                SamplingConfig(rate_hz=rate_hz) if rate_hz else self.config.sampling
            )
            records = ingest_mod.sample_frames(video, sampling)
            crop = self.config.crop_input
        else:
            records = ingest_mod.take_all_frames(video)
            crop = self.config.crop_reference
        if crop:
            records = [
                ingest_mod.detect_and_crop(record, self.providers.detector)
                for record in records
            ]
        self._write_json(
            store_path,
            {
                "video_id": source_id,
                "records": [
                    ingest_mod.record_to_dict(record, self.root) for record in records
                ],
            },
        )
        return records

    def load_frames(self, namespace: str, source_id: str) -> list[FrameRecord]:
        path = self.frames_store(namespace, source_id)
        if not path.is_file():
            raise InvalidProject(f"{source_id!r} has not been ingested")
        data = json.loads(path.read_text(encoding="utf-8"))
        return [ingest_mod.record_from_dict(item, self.root) for item in data["records"]]

    # --- captions --------------------------------------------------------------

    @staticmethod
    def _frames_fingerprint(frames: Sequence[FrameRecord]) -> str:
        return text_digest(":".join(record.content_hash for record in frames))

    def caption(self, source_id: str, *, force: bool = False) -> list[FrameCaptions]:
        namespace = self.resolve_namespace(source_id)
        store_path = self.captions_store(namespace, source_id)
        frames = self.ingest(source_id)
        fingerprint = self._frames_fingerprint(frames)
        if store_path.is_file() and not force:
            data = json.loads(store_path.read_text(encoding="utf-8"))
            # a stale caption store (frames re-ingested differently) is recomputed
            if data.get("frames_fingerprint") == fingerprint:
                return [
                    captioner_mod.captions_from_dict(item, frames)
                    for item in data["captions"]
                ]
        captions = captioner_mod.caption_sequence(
            frames,
            self.templates,
            self.providers.captioner,
            workers=self.config.workers,
        )
        self._write_json(
            store_path,
            {
                "video_id": source_id,
                "frames_fingerprint": fingerprint,
                "captions": [captioner_mod.captions_to_dict(c) for c in captions],
            },
        )
        return captions

    def load_captions(self, namespace: str, source_id: str) -> list[FrameCaptions]:
        path = self.captions_store(namespace, source_id)
        if not path.is_file():
            raise InvalidProject(f"{source_id!r} has not been captioned")
        data = json.loads(path.read_text(encoding="utf-8"))
        frames = self.load_frames(namespace, source_id)
        return [
            captioner_mod.captions_from_dict(item, frames) for item in data["captions"]
        ]

    # --- reference storyboard ---------------------------------------------------

    def reference_storyboard(self, reference_id: str) -> Storyboard:
        """Build (and persist) the reference storyboard for a reference dir."""
        frames = self.ingest(reference_id)
        captions = self.caption(reference_id)
        source = self.load_source("references", reference_id)
        ego = list(source.ego_motion)
        if ego and len(ego) != len(frames) - 1:
            raise MalformedManifest(
                f"reference {reference_id!r} has {len(ego)} ego-motion entries "
                f"for {len(frames)} frames"
            )
        slots = []
        for position, (frame, caption) in enumerate(zip(frames, captions)):
            is_last = position == len(frames) - 1
            slots.append(
                storyboard_mod.StoryboardSlot(
                    slot_index=position,
                    image=frame.image_ref.resolve()
                    .relative_to(self.root)
                    .as_posix(),
                    content_hash=frame.content_hash,
                    pose_caption=caption.pose_caption,
                    context_caption=caption.context_caption,
                    ego_motion_to_next=None if is_last else (ego[position] if ego else None),
                    breakdown=None,
                )
            )
        board = Storyboard(
            id=reference_id,
            kind="reference",
            status="draft",
            reference_storyboard_id=None,
            input_video_id=None,
            config_digest=None,
            ego_motion_policy="copy_reference",
            slots=tuple(slots),
        )
        self.save_storyboard(board)
        return board

    # --- alignment + generation --------------------------------------------------

    def build_matrix(
        self, reference_id: str, video_id: str, alpha: float
    ) -> SimilarityMatrix:
        reference_captions = self.caption(reference_id)
        video_captions = self.caption(video_id)
        return similarity_mod.build_matrix(
            reference_captions, video_captions, alpha, self.providers.embedder
        )

    def save_alignment(
        self, alignment_id: str, result: AlignmentResult, matrix: SimilarityMatrix
    ) -> None:
        self._write_json(
            self.alignment_store(alignment_id),
            {
                "alignment": aligner_mod.alignment_to_dict(result),
                "matrix": similarity_mod.matrix_to_dict(matrix),
            },
        )

    def load_alignment(
        self, alignment_id: str
    ) -> tuple[AlignmentResult, SimilarityMatrix]:
        path = self.alignment_store(alignment_id)
        if not path.is_file():
            raise InvalidProject(f"no stored alignment {alignment_id!r}")
        data = json.loads(path.read_text(encoding="utf-8"))
        return (
            aligner_mod.alignment_from_dict(data["alignment"]),
            similarity_mod.matrix_from_dict(data["matrix"]),
        )

    def list_alignments(self) -> list[str]:
        directory = self.store_dir / "alignments"
        if not directory.is_dir():
            return []
        return sorted(path.stem for path in directory.glob("*.json"))

    def save_storyboard(self, board: Storyboard) -> tuple[Path, Path]:
        out_dir = self.storyboard_dir(board.id)
        [manifest_path] = storyboard_mod.render(
            board, "manifest", out_dir, image_root=self.root
        )
        [html_path] = storyboard_mod.render(
            board, "html", out_dir, image_root=self.root
        )
        return manifest_path, html_path

    def load_storyboard(self, storyboard_id: str) -> Storyboard:
        path = self.storyboard_dir(storyboard_id) / storyboard_mod.MANIFEST_NAME
        if not path.is_file():
            raise InvalidProject(f"no stored storyboard {storyboard_id!r}")
        return storyboard_mod.parse_manifest(path)

    def list_storyboards(self) -> list[str]:
        directory = self.store_dir / "storyboards"
        if not directory.is_dir():
            return []
        return sorted(
            path.parent.name
            for path in directory.glob(f"*/{storyboard_mod.MANIFEST_NAME}")
        )

    def alignment_config(
        self, *, alpha: float | None = None, strategy: str | None = None
    ) -> AlignmentConfig:
        base = self.config.alignment
        return AlignmentConfig(
            alpha=base.alpha if alpha is None else alpha,
            strategy=base.strategy if strategy is None else strategy,
            top_k=base.top_k,
            allow_frame_reuse=base.allow_frame_reuse,
        )

    def align(
        self,
        reference_id: str,
        video_id: str,
        cfg: AlignmentConfig,
    ) -> tuple[str, AlignmentResult, SimilarityMatrix]:
        """Compute and persist the slot-to-frame alignment for one pairing."""
        matrix = self.build_matrix(reference_id, video_id, cfg.alpha)
        result = aligner_mod.align(matrix, cfg)
        alignment_id = f"al-{cfg.digest()[:12]}-{reference_id}-{video_id}"
        self.save_alignment(alignment_id, result, matrix)
        return alignment_id, result, matrix

    def generate(
        self,
        reference_id: str,
        video_id: str,
        *,
        alpha: float | None = None,
        strategy: str | None = None,
        rate_hz: Fraction | None = None,
    ) -> GenerateOutcome:
        """Run every missing stage and produce the generated storyboard."""
        cfg = self.alignment_config(alpha=alpha, strategy=strategy)
        if rate_hz is not None:
            self.ingest(video_id, rate_hz=rate_hz, force=True)

        reference = self.reference_storyboard(reference_id)
        frames = self.ingest(video_id)
        captions = self.caption(video_id)
        alignment_id, result, matrix = self.align(reference_id, video_id, cfg)

        video_ego: Sequence[str] | None = None
        if self.config.ego_motion_policy == "from_input_video":
            video_ego = self.load_source("videos", video_id).ego_motion

        board = storyboard_mod.assemble(
            reference,
            result,
            frames,
            captions,
            image_root=self.root,
            ego_motion_policy=self.config.ego_motion_policy,
            video_ego_motion=video_ego,
        )
        manifest_path, html_path = self.save_storyboard(board)
        return GenerateOutcome(
            storyboard=board,
            reference=reference,
            alignment=result,
            matrix=matrix,
            alignment_id=alignment_id,
            manifest_path=manifest_path,
            html_path=html_path,
        )

    # --- media ---------------------------------------------------------------

    def media_index(self) -> dict[str, Path]:
        """Map content hashes of every ingested frame to absolute image paths."""
        index: dict[str, Path] = {}
        frames_root = self.store_dir / "frames"
        if not frames_root.is_dir():
            return index
        for store_path in sorted(frames_root.glob("*/*.json")):
            data = json.loads(store_path.read_text(encoding="utf-8"))
            for item in data["records"]:
                index[item["content_hash"]] = self.root / item["image"]
        return index


def open_project(root: Path) -> Project:
    return Project(config=load_project_config(root))
