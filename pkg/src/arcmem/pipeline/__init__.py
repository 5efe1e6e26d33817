"""Arc extraction workflow: nine sequential agents plus semantic commit."""

from .agents import (
    PipelineContext,
    agent1_identify_existing,
    agent2_extract_anthology,
    agent3_extract_serial,
    agent4_optimize_season,
    agent5_deduplicate,
    agent6_enhance_details,
    agent7_verify_progressions,
    agent8_verify_roles,
    agent9_final_review_and_commit,
    render_drafts,
    render_flagged,
    semantic_commit,
)
from .drafts import (
    AgentTraceEntry,
    ArcDraft,
    EpisodeExtractionResult,
    FlaggedArc,
    OrderingError,
    PipelineError,
)
from .runner import AGENT_SEQUENCE, checkpoint_path, result_path, run_episode, run_season

__all__ = [
    "PipelineContext",
    "agent1_identify_existing",
    "agent2_extract_anthology",
    "agent3_extract_serial",
    "agent4_optimize_season",
    "agent5_deduplicate",
    "agent6_enhance_details",
    "agent7_verify_progressions",
    "agent8_verify_roles",
    "agent9_final_review_and_commit",
    "render_drafts",
    "render_flagged",
    "semantic_commit",
    "AgentTraceEntry",
    "ArcDraft",
    "EpisodeExtractionResult",
    "FlaggedArc",
    "OrderingError",
    "PipelineError",
    "AGENT_SEQUENCE",
    "checkpoint_path",
    "result_path",
    "run_episode",
    "run_season",
]
