"""Frame selection for storyboard slots.

Two strategies: `greedy` takes the per-slot maximum of the weighted
similarity (the default), and `monotone` maximizes the total under a
strictly increasing frame order, which preserves causality when frame order
matters. Every tie breaks toward the smallest frame index so outputs are
reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from restory.errors import Infeasible, SlotOutOfRange
from restory.hashing import text_digest
from restory.similarity import (
    DEFAULT_ALPHA,
    SimilarityBreakdown,
    SimilarityMatrix,
    check_alpha,
)

STRATEGIES = ("greedy", "monotone")


@dataclass(frozen=True)
class AlignmentConfig:
    alpha: float = DEFAULT_ALPHA
    strategy: str = "greedy"
    top_k: int = 5
    allow_frame_reuse: bool = True

    def __post_init__(self) -> None:
        check_alpha(self.alpha)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    def digest(self) -> str:
        return text_digest(
            json.dumps(
                {
                    "alpha": self.alpha,
                    "strategy": self.strategy,
                    "top_k": self.top_k,
                    "allow_frame_reuse": self.allow_frame_reuse,
                },
                sort_keys=True,
            )
        )


@dataclass(frozen=True)
class Candidate:
    frame_index: int
    breakdown: SimilarityBreakdown


@dataclass(frozen=True)
class SlotChoice:
    slot_index: int
    frame_index: int
    breakdown: SimilarityBreakdown
    candidates: tuple[Candidate, ...]


@dataclass(frozen=True)
class AlignmentResult:
    storyboard_id: str
    video_id: str
    config: AlignmentConfig
    slots: tuple[SlotChoice, ...]
    total_score: float


def rank_candidates(
    matrix: SimilarityMatrix, slot_index: int, k: int
) -> list[Candidate]:
    """Top-k frames for one slot by weighted similarity, ties to smaller index."""
    if not 0 <= slot_index < matrix.slot_count:
        raise SlotOutOfRange(f"slot {slot_index} of {matrix.slot_count}")
    if k < 1:
        raise ValueError("k must be >= 1")
    row = matrix.cells[slot_index]
    order = sorted(range(len(row)), key=lambda j: (-row[j].weighted_sim, j))
    return [Candidate(j, row[j]) for j in order[: min(k, len(row))]]


def _row_argmax(row: Sequence[SimilarityBreakdown], pool: Sequence[int]) -> int:
    best = pool[0]
    for j in pool[1:]:
        if row[j].weighted_sim > row[best].weighted_sim:
            best = j
    return best


def _result(
    matrix: SimilarityMatrix, cfg: AlignmentConfig, chosen: list[int]
) -> AlignmentResult:
    slots = tuple(
        SlotChoice(
            slot_index=i,
            frame_index=j,
            breakdown=matrix.cells[i][j],
            candidates=tuple(rank_candidates(matrix, i, cfg.top_k)),
        )
        for i, j in enumerate(chosen)
    )
    total = sum(matrix.cells[i][j].weighted_sim for i, j in enumerate(chosen))
    return AlignmentResult(
        storyboard_id=matrix.storyboard_id,
        video_id=matrix.video_id,
        config=cfg,
        slots=slots,
        total_score=total,
    )


def align_greedy(matrix: SimilarityMatrix, cfg: AlignmentConfig) -> AlignmentResult:
    """Per-slot argmax of the weighted similarity.

    With allow_frame_reuse=False, selection proceeds slot by slot and each
    chosen frame leaves the later slots' candidate pool.
    """
    if matrix.slot_count == 0 or matrix.frame_count == 0:
        raise ValueError("matrix must be non-empty")
    if not cfg.allow_frame_reuse and matrix.frame_count < matrix.slot_count:
        raise Infeasible(
            f"{matrix.slot_count} slots need distinct frames but only "
            f"{matrix.frame_count} are available"
        )
    chosen: list[int] = []
    pool = list(range(matrix.frame_count))
    for i in range(matrix.slot_count):
        j = _row_argmax(matrix.cells[i], pool)
        chosen.append(j)
        if not cfg.allow_frame_reuse:
            pool.remove(j)
    return _result(matrix, cfg, chosen)


def align_monotone(matrix: SimilarityMatrix, cfg: AlignmentConfig) -> AlignmentResult:
    """Best total weighted similarity over strictly increasing frame indices.

    Suffix dynamic program over (slot, minimum frame): best[i][j] is the
    optimum for slots i.. with slot i choosing a frame >= j. Reconstruction
    takes the smallest frame that achieves the optimum at each slot, which
    yields the lexicographically smallest optimal assignment.
    """
    slots, frames = matrix.slot_count, matrix.frame_count
    if slots == 0 or frames == 0:
        raise ValueError("matrix must be non-empty")
    if frames < slots:
        raise Infeasible(f"{slots} slots but only {frames} frames in order")

    neg_inf = float("-inf")
    score = [[cell.weighted_sim for cell in row] for row in matrix.cells]
    best = [[neg_inf] * (frames + 1) for _ in range(slots + 1)]
    best[slots] = [0.0] * (frames + 1)
    for i in range(slots - 1, -1, -1):
        # frames - j >= slots - i keeps enough frames for the remaining slots
        for j in range(frames - (slots - i), -1, -1):
            take = score[i][j] + best[i + 1][j + 1]
            skip = best[i][j + 1]
            best[i][j] = take if take >= skip else skip

    chosen: list[int] = []
    j = 0
    for i in range(slots):
        while score[i][j] + best[i + 1][j + 1] != best[i][j]:
            j += 1
        chosen.append(j)
        j += 1
    return _result(matrix, cfg, chosen)


def align(matrix: SimilarityMatrix, cfg: AlignmentConfig) -> AlignmentResult:
    if cfg.strategy == "monotone":
        return align_monotone(matrix, cfg)
    return align_greedy(matrix, cfg)


# --- persistence --------------------------------------------------------------


def _breakdown_to_dict(b: SimilarityBreakdown) -> dict:
    return {
        "pose_sim": b.pose_sim,
        "context_sim": b.context_sim,
        "weighted_sim": b.weighted_sim,
        "alpha": b.alpha,
    }


def alignment_to_dict(result: AlignmentResult) -> dict:
    return {
        "storyboard_id": result.storyboard_id,
        "video_id": result.video_id,
        "config": {
            "alpha": result.config.alpha,
            "strategy": result.config.strategy,
            "top_k": result.config.top_k,
            "allow_frame_reuse": result.config.allow_frame_reuse,
        },
        "total_score": result.total_score,
        "slots": [
            {
                "slot_index": s.slot_index,
                "chosen_frame_index": s.frame_index,
                "breakdown": _breakdown_to_dict(s.breakdown),
                "candidates": [
                    {
                        "frame_index": c.frame_index,
                        "breakdown": _breakdown_to_dict(c.breakdown),
                    }
                    for c in s.candidates
                ],
            }
            for s in result.slots
        ],
    }


def alignment_from_dict(data: dict) -> AlignmentResult:
    return AlignmentResult(
        storyboard_id=data["storyboard_id"],
        video_id=data["video_id"],
        config=AlignmentConfig(**data["config"]),
        total_score=data["total_score"],
        slots=tuple(
            SlotChoice(
                slot_index=s["slot_index"],
                frame_index=s["chosen_frame_index"],
                breakdown=SimilarityBreakdown(**s["breakdown"]),
                candidates=tuple(
                    Candidate(
                        frame_index=c["frame_index"],
                        breakdown=SimilarityBreakdown(**c["breakdown"]),
                    )
                    for c in s["candidates"]
                ),
            )
            for s in data["slots"]
        ),
    )
