"""reviewscope: structured LLM feedback on research papers and the
retrospective comment-overlap analysis toolkit."""

from .corpus import (
    CorpusManifest,
    PaperRecord,
    ReviewRecord,
    StratumKey,
    load_corpus,
    stratify,
    validate_corpus,
    write_corpus,
)
from .extraction import Comment, CommentList, extract_comments, parse_comment_json
from .feedback import (
    StructuredFeedback,
    build_review_prompt,
    generate_feedback,
    parse_feedback_sections,
)
from .gateway import (
    CompletionRequest,
    CompletionResponse,
    Gateway,
    SamplingParams,
    TranscriptStore,
    transcript_key,
)
from .ingest import ParsedDocument, assemble_prompt_text, parse_pdf
from .matching import (
    AssignedMatching,
    MatchSet,
    RawMatch,
    assign_one_to_one,
    build_matching_prompt,
    filter_threshold,
    match_comments,
    parse_match_json,
)
from .metrics import (
    ControlPolicy,
    OverlapScores,
    ShufflePlan,
    apply_control,
    bootstrap_ci,
    overlap_scores,
    pearson_r,
    plan_shuffle,
    positional_quartile_rates,
    recall_by_reviewer_count,
)
from .tokens import TokenBudgetConfig, count_tokens, register_tokenizer, truncate_to_budget
from .validation import ConfusionCounts, MatchAnnotation, evaluate_matching, majority_f1, pairwise_agreement, prf

__version__ = "0.1.0"
