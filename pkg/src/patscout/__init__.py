"""patscout: learn bug anti-patterns from labeled examples, then audit C/C++
repositories by slicing context around extracted seeds and asking an LLM to
confirm or reject each candidate, with an independent validation pass."""

from patscout.cindex import CodeIndex, callees_of, callers_of, index_repository
from patscout.detector import (
    BugCandidate,
    BugReport,
    PipelineConfig,
    RunLog,
    ValidationVerdict,
    detect,
    run_pipeline,
    validate,
)
from patscout.gateway import CostLedger, LlmExchange, LlmGateway, ModelProfile, tally_cost
from patscout.prompts import (
    DetectionPrompt,
    ReasoningHintSet,
    reflect_and_refine,
    synthesize_detection_prompt,
)
from patscout.slicer import (
    DetectionContext,
    Slice,
    SlicerConfig,
    inline_slices,
    interprocedural_slice,
    intra_slice,
)
from patscout.strategy import (
    AntiPatternSpec,
    MatcherRule,
    RetrievalStrategy,
    Seed,
    SeedExtractorSpec,
    extract_seeds,
    synthesize_retrieval_strategy,
)

__version__ = "0.1.0"

__all__ = [
    "AntiPatternSpec",
    "BugCandidate",
    "BugReport",
    "CodeIndex",
    "CostLedger",
    "DetectionContext",
    "DetectionPrompt",
    "LlmExchange",
    "LlmGateway",
    "MatcherRule",
    "ModelProfile",
    "PipelineConfig",
    "ReasoningHintSet",
    "RetrievalStrategy",
    "RunLog",
    "Seed",
    "SeedExtractorSpec",
    "Slice",
    "SlicerConfig",
    "ValidationVerdict",
    "callees_of",
    "callers_of",
    "detect",
    "extract_seeds",
    "index_repository",
    "inline_slices",
    "interprocedural_slice",
    "intra_slice",
    "reflect_and_refine",
    "run_pipeline",
    "synthesize_detection_prompt",
    "synthesize_retrieval_strategy",
    "tally_cost",
    "validate",
]
