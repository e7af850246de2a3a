"""Zero-shot video temporal grounding from frame captions and debiased queries."""

from groundline.core import (
    FrameTimeline,
    Query,
    SimilarityMatrix,
    TimeSegment,
    ValidationError,
    frame_index_to_segment,
    iou,
)
from groundline.grounder import (
    GeneratorConfig,
    NmsConfig,
    Proposal,
    ScoredProposal,
    ScorerConfig,
    dynamic_threshold,
    ground,
    nms,
    saliency,
    scan_proposals,
    score_proposal,
)

__version__ = "0.1.0"
