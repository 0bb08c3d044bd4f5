"""Exact margin-based global mining of embedded segment pools."""

from ._backend import NAME as BACKEND
from .embed_store import (
    EmbeddingMatrix,
    Segment,
    SegmentManifest,
    UnitEmbeddingMatrix,
    l2_normalize,
    load_embeddings,
    load_manifest,
    save_embeddings,
    save_manifest,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    FormatError,
    MinerError,
    ParseError,
    TruncationError,
    ValidationError,
)
from .knn import NeighborTable, knn, knn_oracle
from .margin import MarginParams, ScoredCandidates, margin_score, score_pairs, similarity_search_error
from .miner import Alignment, AlignmentSet, MiningConfig, mine
from .postprocess import (
    OverlapPolicy,
    SessionScore,
    curate_eval_set,
    duration_stats,
    remove_overlaps,
    select_threshold,
)
from .segmenter import CandidateSegment, DurationBounds, VadTimeline, generate_candidates

__version__ = "0.1.0"
