"""Cosine similarity between caption embeddings and the weighted combination.

All arithmetic is 64-bit; raw cosine values are used unclipped because
clipping could flip an argmax. The weight alpha trades pose similarity
against context similarity and defaults to 0.2 (context dominates).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from restory.captioner import FrameCaptions
from restory.errors import AlphaOutOfRange, DimensionMismatch, ProviderError
from restory.providers.base import EmbeddingVector
from restory.providers.services import EmbeddingService

DEFAULT_ALPHA = 0.2


def check_alpha(alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must be in [0, 1], got {alpha}")
    return float(alpha)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(f"cosine of dims {a.dim} and {b.dim}")
    return float(np.dot(np.asarray(a.values), np.asarray(b.values)))


def weighted_similarity(pose_sim: float, context_sim: float, alpha: float) -> float:
    check_alpha(alpha)
    return alpha * pose_sim + (1.0 - alpha) * context_sim


@dataclass(frozen=True)
class SimilarityBreakdown:
    pose_sim: float
    context_sim: float
    weighted_sim: float
    alpha: float


def make_breakdown(pose_sim: float, context_sim: float, alpha: float) -> SimilarityBreakdown:
    return SimilarityBreakdown(
        pose_sim=pose_sim,
        context_sim=context_sim,
        weighted_sim=weighted_similarity(pose_sim, context_sim, alpha),
        alpha=alpha,
    )


@dataclass(frozen=True)
class SimilarityMatrix:
    """Slot-major grid of breakdowns: cells[slot][frame]."""

    storyboard_id: str
    video_id: str
    alpha: float
    cells: tuple[tuple[SimilarityBreakdown, ...], ...]

    @property
    def slot_count(self) -> int:
        return len(self.cells)

    @property
    def frame_count(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    def __post_init__(self) -> None:
        widths = {len(row) for row in self.cells}
        if len(widths) > 1:
            raise ValueError("matrix rows must all have the same length")
        alphas = {cell.alpha for row in self.cells for cell in row}
        if alphas - {self.alpha}:
            raise ValueError("all cells must share the matrix alpha")


def build_matrix(
    storyboard_captions: Sequence[FrameCaptions],
    frame_captions: Sequence[FrameCaptions],
    alpha: float,
    embedder: EmbeddingService,
) -> SimilarityMatrix:
    """Pairwise pose/context/weighted similarities for slots x frames.

    Each distinct caption text is embedded exactly once per call; the
    embedding service's disk cache removes repeats across calls too.
    """
    if not storyboard_captions or not frame_captions:
        raise ValueError("caption lists must be non-empty")
    check_alpha(alpha)

    vectors: dict[str, EmbeddingVector] = {}

    def vector_for(text: str, origin: str) -> EmbeddingVector:
        if text not in vectors:
            try:
                vectors[text] = embedder.embed(text)
            except ProviderError as exc:
                raise type(exc)(f"{origin}: {exc}") from exc
        return vectors[text]

    slot_vectors = [
        (
            vector_for(c.pose_caption, f"slot {i} pose caption"),
            vector_for(c.context_caption, f"slot {i} context caption"),
        )
        for i, c in enumerate(storyboard_captions)
    ]
    frame_vectors = [
        (
            vector_for(c.pose_caption, f"frame {j} pose caption"),
            vector_for(c.context_caption, f"frame {j} context caption"),
        )
        for j, c in enumerate(frame_captions)
    ]

    cells = tuple(
        tuple(
            make_breakdown(
                cosine(slot_pose, frame_pose), cosine(slot_ctx, frame_ctx), alpha
            )
            for frame_pose, frame_ctx in frame_vectors
        )
        for slot_pose, slot_ctx in slot_vectors
    )
    return SimilarityMatrix(
        storyboard_id=storyboard_captions[0].frame.video_id,
        video_id=frame_captions[0].frame.video_id,
        alpha=alpha,
        cells=cells,
    )


def reweight(matrix: SimilarityMatrix, alpha: float) -> SimilarityMatrix:
    """Recompute weighted similarities under a new alpha; no embedding calls."""
    check_alpha(alpha)
    if alpha == matrix.alpha:
        return matrix
    cells = tuple(
        tuple(make_breakdown(c.pose_sim, c.context_sim, alpha) for c in row)
        for row in matrix.cells
    )
    return replace(matrix, alpha=alpha, cells=cells)


def matrix_to_tsv(matrix: SimilarityMatrix) -> str:
    """Debug export: one row per slot, weighted similarities only."""
    lines = [
        "\t".join(f"{cell.weighted_sim:.6f}" for cell in row) for row in matrix.cells
    ]
    return "\n".join(lines) + "\n"


# --- persistence --------------------------------------------------------------


def matrix_to_dict(matrix: SimilarityMatrix) -> dict:
    return {
        "storyboard_id": matrix.storyboard_id,
        "video_id": matrix.video_id,
        "alpha": matrix.alpha,
        "cells": [
            [
                {
                    "pose_sim": c.pose_sim,
                    "context_sim": c.context_sim,
                    "weighted_sim": c.weighted_sim,
                    "alpha": c.alpha,
                }
                for c in row
            ]
            for row in matrix.cells
        ],
    }


def matrix_from_dict(data: dict) -> SimilarityMatrix:
    return SimilarityMatrix(
        storyboard_id=data["storyboard_id"],
        video_id=data["video_id"],
        alpha=data["alpha"],
        cells=tuple(
            tuple(SimilarityBreakdown(**cell) for cell in row)
            for row in data["cells"]
        ),
    )
