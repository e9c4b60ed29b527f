"""REST API over a project, powering the review UI.

Alignments and storyboards are held in a session state loaded from the
project's stores; every persisted storyboard survives a server restart
byte-for-byte. Mutations carry a per-storyboard version token (the edit
count), so a stale tab gets a 409 instead of silently clobbering a
colleague's curation. Recomputation reuses the stored pose/context
similarities, so it never touches a provider.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from restory import aligner as aligner_mod
from restory import similarity as similarity_mod
from restory import storyboard as storyboard_mod
from restory.aligner import AlignmentConfig, AlignmentResult
from restory.errors import (
    AlphaOutOfRange,
    IndexOutOfRange,
    MissingFrame,
    MissingMatrix,
    RestoryError,
)
from restory.project import Project
from restory.similarity import SimilarityMatrix
from restory.storyboard import CurationEdit, Storyboard


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class SessionState:
    project: Project
    storyboards: dict[str, Storyboard] = field(default_factory=dict)
    alignments: dict[str, tuple[AlignmentResult, SimilarityMatrix]] = field(
        default_factory=dict
    )
    storyboard_alignment: dict[str, str] = field(default_factory=dict)
    pending_edits: list[dict] = field(default_factory=list)
    media: dict[str, Path] = field(default_factory=dict)
    video_frames: dict[str, list] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    recompute_counter: itertools.count = field(default_factory=itertools.count)

    def load(self) -> None:
        for alignment_id in self.project.list_alignments():
            self.alignments[alignment_id] = self.project.load_alignment(alignment_id)
        for storyboard_id in self.project.list_storyboards():
            board = self.project.load_storyboard(storyboard_id)
            self.storyboards[storyboard_id] = board
            self._link_alignment(board)
        self.media = self.project.media_index()

    def frames_for(self, video_id: str) -> list:
        if video_id not in self.video_frames:
            try:
                self.video_frames[video_id] = self.project.load_frames(
                    "videos", video_id
                )
            except RestoryError:
                self.video_frames[video_id] = []
        return self.video_frames[video_id]

    def _link_alignment(self, board: Storyboard) -> None:
        if board.kind == "reference" or board.config_digest is None:
            return
        for alignment_id, (result, _) in self.alignments.items():
            if (
                result.config.digest() == board.config_digest
                and result.storyboard_id == board.reference_storyboard_id
                and result.video_id == board.input_video_id
            ):
                self.storyboard_alignment[board.id] = alignment_id
                return


def _summary(board: Storyboard, alignment_id: str | None) -> dict:
    return {
        "id": board.id,
        "kind": board.kind,
        "status": board.status,
        "slot_count": len(board.slots),
        "reference_storyboard_id": board.reference_storyboard_id,
        "input_video_id": board.input_video_id,
        "version": board.version,
        "alignment_id": alignment_id,
    }


class RecomputeBody(BaseModel):
    alpha: float | None = None
    strategy: str | None = None


class EditBody(BaseModel):
    kind: str
    a: int = 0
    b: int = 0
    version: int


def create_app(project: Project, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="restory review API")
    state = SessionState(project=project)
    state.load()

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status,
            content={"error": exc.code, "message": exc.message},
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation(
        _request: Request, exc: RequestValidationError
    ) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"error": "validation", "message": str(exc.errors())},
        )

    def storyboard_or_404(storyboard_id: str) -> Storyboard:
        board = state.storyboards.get(storyboard_id)
        if board is None:
            raise ApiError(404, "not_found", f"no storyboard {storyboard_id!r}")
        return board

    def alignment_or_404(alignment_id: str) -> tuple[AlignmentResult, SimilarityMatrix]:
        entry = state.alignments.get(alignment_id)
        if entry is None:
            raise ApiError(404, "not_found", f"no alignment {alignment_id!r}")
        return entry

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/api/storyboards")
    def list_storyboards() -> dict:
        summaries = [
            _summary(board, state.storyboard_alignment.get(board_id))
            for board_id, board in sorted(state.storyboards.items())
        ]
        return {"storyboards": summaries}

    @app.get("/api/storyboards/{storyboard_id}")
    def get_storyboard(storyboard_id: str) -> dict:
        board = storyboard_or_404(storyboard_id)
        doc = storyboard_mod.storyboard_to_json(board)
        doc["version"] = board.version
        doc["alignment_id"] = state.storyboard_alignment.get(storyboard_id)
        return doc

    @app.get("/api/alignments/{alignment_id}")
    def get_alignment(alignment_id: str) -> dict:
        result, _matrix = alignment_or_404(alignment_id)
        board_summary = None
        for board_id, linked in state.storyboard_alignment.items():
            if linked == alignment_id:
                board_summary = _summary(state.storyboards[board_id], alignment_id)
                break
        return {
            "alignment_id": alignment_id,
            "alignment": aligner_mod.alignment_to_dict(result),
            "storyboard": board_summary,
        }

    @app.get("/api/alignments/{alignment_id}/slots/{slot_index}/candidates")
    def get_candidates(alignment_id: str, slot_index: int, k: int | None = None) -> dict:
        result, matrix = alignment_or_404(alignment_id)
        top_k = result.config.top_k if k is None else k
        if top_k < 1:
            raise ApiError(422, "invalid_k", "k must be >= 1")
        try:
            candidates = aligner_mod.rank_candidates(matrix, slot_index, top_k)
        except RestoryError as exc:
            raise ApiError(422, "invalid_slot", str(exc)) from exc
        frames = state.frames_for(result.video_id)
        entries = []
        for c in candidates:
            entry = {
                "frame_index": c.frame_index,
                "content_hash": (
                    frames[c.frame_index].content_hash
                    if c.frame_index < len(frames)
                    else None
                ),
                "breakdown": {
                    "pose_sim": c.breakdown.pose_sim,
                    "context_sim": c.breakdown.context_sim,
                    "weighted_sim": c.breakdown.weighted_sim,
                    "alpha": c.breakdown.alpha,
                },
            }
            entries.append(entry)
        return {"slot_index": slot_index, "candidates": entries}

    @app.post("/api/alignments/{alignment_id}/recompute")
    def recompute(alignment_id: str, body: RecomputeBody) -> dict:
        result, matrix = alignment_or_404(alignment_id)
        base = result.config
        try:
            cfg = AlignmentConfig(
                alpha=base.alpha if body.alpha is None else body.alpha,
                strategy=base.strategy if body.strategy is None else body.strategy,
                top_k=base.top_k,
                allow_frame_reuse=base.allow_frame_reuse,
            )
            new_matrix = similarity_mod.reweight(matrix, cfg.alpha)
            new_result = aligner_mod.align(new_matrix, cfg)
        except (AlphaOutOfRange, ValueError) as exc:
            raise ApiError(422, "invalid_parameters", str(exc)) from exc
        with state.lock:
            new_id = f"{alignment_id}-r{next(state.recompute_counter)}"
            state.alignments[new_id] = (new_result, new_matrix)
        return {
            "alignment_id": new_id,
            "alignment": aligner_mod.alignment_to_dict(new_result),
            "storyboard": None,
        }

    @app.post("/api/storyboards/{storyboard_id}/edits")
    def submit_edit(storyboard_id: str, body: EditBody) -> dict:
        with state.lock:
            board = storyboard_or_404(storyboard_id)
            if board.status == "approved":
                raise ApiError(409, "approved", "storyboard is approved; editing is closed")
            if body.version != board.version:
                raise ApiError(
                    409,
                    "version_conflict",
                    f"storyboard is at version {board.version}, request sent {body.version}",
                )
            try:
                edit = CurationEdit(kind=body.kind, a=body.a, b=body.b)
            except ValueError as exc:
                raise ApiError(422, "invalid_edit", str(exc)) from exc

            matrix = None
            frames = None
            captions = None
            alignment_id = state.storyboard_alignment.get(storyboard_id)
            if edit.kind == "replace_frame":
                if alignment_id is not None:
                    _, matrix = state.alignments[alignment_id]
                if board.input_video_id is not None:
                    frames = state.project.load_frames("videos", board.input_video_id)
                    captions = state.project.load_captions(
                        "videos", board.input_video_id
                    )
            try:
                updated = storyboard_mod.apply_edit(
                    board,
                    edit,
                    matrix=matrix,
                    frames=frames,
                    captions=captions,
                    image_root=state.project.root,
                )
            except (IndexOutOfRange, MissingMatrix, MissingFrame) as exc:
                raise ApiError(422, "invalid_edit", str(exc)) from exc

            state.project.save_storyboard(updated)
            state.storyboards[storyboard_id] = updated
            if alignment_id is not None:
                state.storyboard_alignment[storyboard_id] = alignment_id
            state.pending_edits.append(
                {"storyboard_id": storyboard_id, "kind": edit.kind, "a": edit.a, "b": edit.b}
            )
        return _summary(updated, alignment_id)

    @app.post("/api/storyboards/{storyboard_id}/export")
    def export_storyboard(storyboard_id: str) -> dict:
        board = storyboard_or_404(storyboard_id)
        manifest_path, html_path = state.project.save_storyboard(board)
        return {"manifest": str(manifest_path), "html": str(html_path)}

    @app.get("/media/{content_hash}")
    def media(content_hash: str) -> FileResponse:
        path = state.media.get(content_hash)
        if path is None or not path.is_file():
            raise ApiError(404, "not_found", f"no media {content_hash!r}")
        return FileResponse(path, media_type="image/png")

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
