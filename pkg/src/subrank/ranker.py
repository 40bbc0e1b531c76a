"""scikit-learn style estimator facade over the ranking pipeline.

``CandidateRanker`` is an unsupervised estimator: ``fit`` only resolves and
validates parameters (there is nothing to learn), ``predict`` maps a list of
substitution instances to ranking results, and ``score`` returns the mean
generalized average precision against the instances' own gold sets — which
makes the weighting scheme and layer range searchable with stock sklearn
model-selection tools.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .attribution import SCHEMES, IgConfig, LayerRange, default_layer_range
from .backend import TARGET_MODES, VOCAB_PROB
from .data import SubstitutionInstance
from .encoder import EncoderConfig, ReferenceEncoder
from .errors import ConfigurationError, InputError
from .metrics import evaluate_rankings
from .scorer import RankingResult, rank_candidates
from .tokenizer import Vocabulary, default_vocabulary

DEFAULT_D_MODEL = 32
DEFAULT_N_HEADS = 4
DEFAULT_N_LAYERS = 6
DEFAULT_FFN_DIM = 64
DEFAULT_MAX_POSITIONS = 512


def default_encoder_config(vocab_size: int, seed: int = 42) -> EncoderConfig:
    """Small reference-encoder configuration used when none is supplied."""
    return EncoderConfig(
        vocab_size=vocab_size,
        d_model=DEFAULT_D_MODEL,
        n_heads=DEFAULT_N_HEADS,
        n_layers=DEFAULT_N_LAYERS,
        ffn_dim=DEFAULT_FFN_DIM,
        max_positions=DEFAULT_MAX_POSITIONS,
        seed=seed,
    )


def _check_instances(X) -> list[SubstitutionInstance]:
    instances = list(X)
    for item in instances:
        if not isinstance(item, SubstitutionInstance):
            raise InputError(
                f"expected SubstitutionInstance items, got {type(item).__name__}"
            )
    return instances


class CandidateRanker(BaseEstimator):
    """Rank substitution candidates by weighted sentence-pair similarity.

    Parameters
    ----------
    backend : encoder backend or None
        Defaults to a seeded reference encoder sized to the vocabulary.
    vocab : Vocabulary or None
        Defaults to the character-level fallback vocabulary.
    scheme : {"target_only", "uniform_one", "attention", "integrated_gradients"}
    include_target : bool
        Whether the target-position similarity enters the score (weight 1).
    layer_start, layer_end : int or None
        Hidden-layer range for representations and attention averaging;
        None selects third-through-(top-2), clamped to be non-empty.
    ig_steps : int
        Path-integral resolution for gradient attribution.
    ig_mode : {"vocab_prob", "l2_norm"}
    seed : int
        Reference-encoder seed when no backend is given.
    """

    def __init__(
        self,
        backend=None,
        vocab: Vocabulary | None = None,
        scheme: str = "attention",
        include_target: bool = True,
        layer_start: int | None = None,
        layer_end: int | None = None,
        ig_steps: int = 32,
        ig_mode: str = VOCAB_PROB,
        seed: int = 42,
    ):
        self.backend = backend
        self.vocab = vocab
        self.scheme = scheme
        self.include_target = include_target
        self.layer_start = layer_start
        self.layer_end = layer_end
        self.ig_steps = ig_steps
        self.ig_mode = ig_mode
        self.seed = seed

    def fit(self, X=None, y=None):
        """Resolve defaults and validate parameters; nothing is learned."""
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.ig_mode not in TARGET_MODES:
            raise ConfigurationError(f"ig_mode must be one of {TARGET_MODES}")
        self.vocab_ = self.vocab if self.vocab is not None else default_vocabulary()
        if self.backend is not None:
            self.backend_ = self.backend
        else:
            self.backend_ = ReferenceEncoder(
                default_encoder_config(len(self.vocab_), seed=self.seed)
            )
        if (self.layer_start is None) != (self.layer_end is None):
            raise ConfigurationError("layer_start and layer_end must be set together")
        if self.layer_start is None:
            self.layer_range_ = default_layer_range(self.backend_.n_layers)
        else:
            self.layer_range_ = LayerRange(self.layer_start, self.layer_end)
        self.layer_range_.check_against(self.backend_.n_layers)
        self.ig_config_ = IgConfig(steps=self.ig_steps, mode=self.ig_mode)
        return self

    def _require_fitted(self) -> None:
        if not hasattr(self, "backend_"):
            raise ConfigurationError("this CandidateRanker instance is not fitted yet; call fit()")

    def predict(self, X) -> list[RankingResult]:
        """Ranking result per instance, in input order."""
        self._require_fitted()
        return [
            rank_candidates(
                instance,
                self.backend_,
                self.vocab_,
                self.scheme,
                include_target=self.include_target,
                layer_range=self.layer_range_,
                ig_config=self.ig_config_,
            )
            for instance in _check_instances(X)
        ]

    def score(self, X, y=None) -> float:
        """Mean generalized average precision in [0, 1] against the
        instances' own gold sets (y is ignored; the gold travels with X)."""
        instances = _check_instances(X)
        results = self.predict(instances)
        rankings = {r.instance_id: list(r.candidates) for r in results}
        gold_sets = {i.id: i.gold_mapping() for i in instances}
        return evaluate_rankings(rankings, gold_sets).mean_gap
