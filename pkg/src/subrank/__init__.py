"""Unsupervised lexical-substitution candidate ranking.

Candidates are scored by the weighted sum of token-level cosine
similarities between the original sentence and the substituted sentence,
with per-token weights from attention aggregation or integrated gradients;
rankings are evaluated with generalized average precision.
"""

from .attribution import (
    ATTENTION,
    INTEGRATED_GRADIENTS,
    SCHEMES,
    TARGET_ONLY,
    UNIFORM_ONE,
    IgConfig,
    LayerRange,
    RawScores,
    TokenWeights,
    attention_scores,
    compute_token_weights,
    default_layer_range,
    integrated_gradient_attributions,
    integrated_gradients,
    normalize,
)
from .backend import (
    L2_NORM,
    VOCAB_PROB,
    EncoderBackend,
    EncoderOutput,
    TargetFunction,
    evaluate_target,
)
from .data import (
    GoldSubstitute,
    SubstitutionInstance,
    TargetWord,
    convert_ls07,
    convert_swords,
    load_canonical,
    pool_candidates,
    write_canonical,
)
from .encoder import EncoderConfig, ReferenceEncoder
from .errors import (
    AggregationError,
    CapabilityError,
    ConfigurationError,
    ConversionError,
    DegenerateInputError,
    InputError,
    InternalConsistencyError,
    MultiwordCandidateError,
    ParseError,
    SubrankError,
    ValidationError,
)
from .metrics import GapReport, InstanceGap, evaluate_rankings, filter_multiword, gap, mean_gap
from .ranker import CandidateRanker, default_encoder_config
from .scorer import (
    RankingResult,
    cosine,
    prepare_sentence,
    rank_candidates,
    represent,
    substitution_score,
)
from .tokenizer import (
    Alignment,
    TokenizedSentence,
    Vocabulary,
    build_vocabulary,
    default_vocabulary,
    load_vocabulary,
    locate_target,
    save_vocabulary,
    substitute,
    tokenize,
)

__version__ = "0.1.0"
