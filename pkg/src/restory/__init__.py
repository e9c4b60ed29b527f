"""Re-express interaction storyboards with frames from other footage.

The pipeline captions a reference storyboard and a second participant's
footage with a vision-language model, embeds the captions, and fills each
storyboard slot with the input frame whose captions are most similar. A REST
server and a browser board let a human review, correct, and approve the
result.
"""

__version__ = "0.1.0"

from restory.aligner import AlignmentConfig, AlignmentResult
from restory.captioner import FrameCaptions, PromptTemplates
from restory.ingest import FrameRecord, SamplingConfig, SourceVideo
from restory.similarity import SimilarityBreakdown, SimilarityMatrix
from restory.storyboard import CurationEdit, Storyboard, StoryboardSlot

__all__ = [
    "AlignmentConfig",
    "AlignmentResult",
    "CurationEdit",
    "FrameCaptions",
    "FrameRecord",
    "PromptTemplates",
    "SamplingConfig",
    "SimilarityBreakdown",
    "SimilarityMatrix",
    "SourceVideo",
    "Storyboard",
    "StoryboardSlot",
    "__version__",
]
