"""Token-importance scoring and weight normalization.

Two raw influence measures for how much each context token matters to the
target token, both computed once on the original sentence and reused for
every candidate:

* attention aggregation — average the post-softmax attention probabilities
  over a layer range and all heads, then read the attention each context
  token directs at the target;
* integrated gradients — accumulate exact gradients of a target function
  along the straight path from a pad-embedding baseline to the masked
  sentence's embeddings, sum per token over embedding dimensions, and take
  absolute values (a strongly negative attribution is still influential,
  and softmax would otherwise rank it last).

Raw scores are normalized into per-token weights by softmax over the
context tokens only; the target token's weight is fixed to 1 when included,
0 when dropped. Two degenerate schemes round out the grid: uniform weight 1
for every token, and target-only (all context weights 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import (
    L2_NORM,
    VOCAB_PROB,
    EncoderBackend,
    EncoderOutput,
    TargetFunction,
    softmax,
)
from .errors import (
    CapabilityError,
    ConfigurationError,
    DegenerateInputError,
    InputError,
)
from .tokenizer import TokenizedSentence

TARGET_ONLY = "target_only"
UNIFORM_ONE = "uniform_one"
ATTENTION = "attention"
INTEGRATED_GRADIENTS = "integrated_gradients"
SCHEMES = (TARGET_ONLY, UNIFORM_ONE, ATTENTION, INTEGRATED_GRADIENTS)
SOFTMAX_SCHEMES = (ATTENTION, INTEGRATED_GRADIENTS)


@dataclass(frozen=True)
class LayerRange:
    """Inclusive 1-based range of encoder layers; layer 0 (the embedding
    output) is never part of a range."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not (isinstance(self.start, int) and isinstance(self.end, int)):
            raise ConfigurationError("layer range bounds must be integers")
        if not 1 <= self.start <= self.end:
            raise ConfigurationError(f"invalid layer range [{self.start}, {self.end}]")

    def check_against(self, n_layers: int) -> None:
        if self.end > n_layers:
            raise ConfigurationError(
                f"layer range [{self.start}, {self.end}] exceeds {n_layers} layers"
            )

    @property
    def width(self) -> int:
        return self.end - self.start + 1


def default_layer_range(n_layers: int) -> LayerRange:
    """Third layer through the one two below the top, clamped so the range
    is never empty (n_layers=4 yields [3, 3])."""
    start = min(3, n_layers)
    return LayerRange(start, max(n_layers - 2, start))


@dataclass(frozen=True)
class IgConfig:
    """Step count and target-function mode for gradient attribution.

    The interpolation baseline is always the pad token's embedding at every
    position; it is fixed by contract rather than configurable.
    """

    steps: int = 32
    mode: str = VOCAB_PROB

    def __post_init__(self) -> None:
        if not isinstance(self.steps, int) or self.steps < 1:
            raise ConfigurationError(f"ig steps must be a positive integer, got {self.steps!r}")
        if self.mode not in (VOCAB_PROB, L2_NORM):
            raise ConfigurationError(f"unknown ig mode {self.mode!r}")


@dataclass(frozen=True)
class RawScores:
    """Raw influence value per context token position.

    ``target_score`` is filled only on request: the target span's pooled
    self-influence, needed by the exploratory joint-softmax normalization.
    """

    positions: tuple[int, ...]
    scores: np.ndarray
    target_score: float | None = None


@dataclass(frozen=True)
class TokenWeights:
    """Normalized per-token weights for the similarity sum.

    ``positions`` index context tokens of the ORIGINAL sentence; the same
    weights object is reused for every candidate of an instance.
    ``target_in_softmax`` marks the exploratory variant where the target
    competes inside the softmax instead of keeping fixed weight 1.
    """

    scheme: str
    positions: tuple[int, ...]
    weights: np.ndarray
    target_weight: float
    include_target: bool
    target_in_softmax: bool = False

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown weighting scheme {self.scheme!r}")
        if len(self.positions) != self.weights.shape[0]:
            raise ConfigurationError("positions and weights length mismatch")
        if self.scheme in SOFTMAX_SCHEMES:
            if np.any(self.weights < 0.0):
                raise ConfigurationError("softmax weights must be non-negative")
            if self.target_in_softmax:
                total = float(self.weights.sum()) + self.target_weight
                if abs(total - 1.0) > 1e-9:
                    raise ConfigurationError("joint softmax weights must sum to 1 with the target")
            else:
                if abs(float(self.weights.sum()) - 1.0) > 1e-9:
                    raise ConfigurationError("softmax weights must sum to 1")
                expected = 1.0 if self.include_target else 0.0
                if self.target_weight != expected:
                    raise ConfigurationError("target weight inconsistent with include_target")
        elif self.scheme == UNIFORM_ONE:
            if self.target_weight != 1.0 or np.any(self.weights != 1.0):
                raise ConfigurationError("uniform scheme requires every weight = 1")
        else:  # TARGET_ONLY
            if self.target_weight != 1.0 or np.any(self.weights != 0.0):
                raise ConfigurationError("target-only scheme requires zero context weights")


def _context_positions(
    seq_len: int, target_span: tuple[int, int], include_specials: bool
) -> tuple[int, ...]:
    lo = 0 if include_specials else 1
    hi = seq_len if include_specials else seq_len - 1
    a, b = target_span
    return tuple(i for i in range(lo, hi) if not a <= i < b)


def attention_scores(
    output: EncoderOutput,
    target_span: tuple[int, int],
    layer_range: LayerRange,
    include_specials: bool = False,
    with_target_score: bool = False,
) -> RawScores:
    """Mean attention each context token directs at the target span.

    The per-layer/per-head probability tensors in the range are averaged
    into one matrix; a context token's score is the averaged attention from
    its query row to the target key column(s). Rows for the target span and
    the specials are excluded. ``with_target_score`` additionally reads the
    target span's pooled self-attention (for the joint-softmax variant).
    """
    layer_range.check_against(output.n_layers)
    seq_len = output.seq_len
    a, b = target_span
    if not 0 <= a < b <= seq_len:
        raise InputError(f"target span [{a}, {b}) outside sequence of length {seq_len}")

    mean = np.zeros((seq_len, seq_len), dtype=np.float64)
    for layer in range(layer_range.start, layer_range.end + 1):
        mean += output.attentions[layer - 1].mean(axis=0)
    mean /= layer_range.width

    positions = _context_positions(seq_len, target_span, include_specials)
    scores = np.array([mean[i, a:b].mean() for i in positions], dtype=np.float64)
    target_score = float(mean[a:b, a:b].mean()) if with_target_score else None
    return RawScores(positions=positions, scores=scores, target_score=target_score)


def integrated_gradient_attributions(
    backend: EncoderBackend,
    token_ids,
    fn: TargetFunction,
    steps: int,
) -> np.ndarray:
    """Signed per-token attribution for every position.

    Left-Riemann path integral from the pad-embedding baseline to the
    sequence's embeddings, multiplied by that displacement and summed over
    embedding dimensions. At high step counts the attributions sum to
    approximately F(input) - F(baseline).
    """
    if not getattr(backend, "supports_gradients", False):
        raise CapabilityError("backend does not support gradients w.r.t. embeddings")
    token_ids = list(token_ids)
    x = backend.lookup_embeddings(token_ids)
    baseline = backend.lookup_embeddings([backend.pad_token_id] * len(token_ids))
    displacement = x - baseline
    grad_total = np.zeros_like(x)
    for k in range(steps):
        alpha = k / steps
        grad_total += backend.gradient_wrt_embeddings(baseline + alpha * displacement, fn)
    return (displacement * grad_total / steps).sum(axis=1)


def integrated_gradients(
    backend: EncoderBackend,
    token_ids_masked,
    mask_span: tuple[int, int],
    config: IgConfig,
    target_token_id: int | None = None,
    include_specials: bool = False,
    with_target_score: bool = False,
) -> RawScores:
    """Raw influence scores from gradient attribution on the masked sentence.

    ``token_ids_masked`` is the original sequence with the whole target span
    collapsed to one mask token; the target function is either the
    vocabulary probability of ``target_token_id`` (the original target's
    first subword) at the mask position, or the final hidden norm there.
    Scores are absolute attributions at context positions of the masked
    sequence; ``with_target_score`` also reports the mask position's own
    absolute attribution.
    """
    token_ids_masked = list(token_ids_masked)
    a, b = mask_span
    if b - a != 1:
        raise InputError(f"mask span must cover exactly one token, got [{a}, {b})")
    if not 0 <= a < len(token_ids_masked):
        raise InputError("mask span outside sequence")
    if token_ids_masked[a] != backend.mask_token_id:
        raise InputError(
            f"token at mask position {a} is {token_ids_masked[a]}, "
            f"expected mask id {backend.mask_token_id}"
        )
    if config.mode == VOCAB_PROB and target_token_id is None:
        raise InputError("vocab_prob attribution requires the original target token id")

    fn = TargetFunction(
        mode=config.mode,
        position=a,
        token_id=target_token_id if config.mode == VOCAB_PROB else None,
    )
    attributions = integrated_gradient_attributions(backend, token_ids_masked, fn, config.steps)
    positions = _context_positions(len(token_ids_masked), mask_span, include_specials)
    scores = np.abs(attributions[list(positions)])
    target_score = float(abs(attributions[a])) if with_target_score else None
    return RawScores(positions=positions, scores=scores, target_score=target_score)


def _exact_unit_sum(weights: np.ndarray) -> np.ndarray:
    """Nudge one weight by the ulp-scale residual so the float64 sum is
    exactly 1.0. Pairwise summation can absorb a nudge at one index, so
    fall through the indices largest-first until the sum lands."""
    order = [int(np.argmax(weights))] + list(np.argsort(weights)[::-1])
    for idx in order:
        for _ in range(8):
            total = float(weights.sum())
            if total == 1.0:
                return weights
            adjusted = weights[idx] + (1.0 - total)
            if adjusted < 0.0:
                break
            weights[idx] = adjusted
    return weights


def normalize(
    raw: RawScores,
    scheme: str,
    include_target: bool = True,
    target_in_softmax: bool = False,
) -> TokenWeights:
    """Turn raw scores into weights under the requested scheme.

    Softmax schemes spread unit mass over the context tokens (temperature
    1); the target keeps weight 1 when included, 0 otherwise. The uniform
    scheme sets every weight to 1 and target-only zeroes the context.

    ``target_in_softmax`` switches to the exploratory variant where the
    target's own raw score competes in the softmax instead of being fixed;
    it needs ``raw.target_score`` and makes no claim of matching any
    published ablation.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown weighting scheme {scheme!r}")
    n = len(raw.positions)
    if scheme in SOFTMAX_SCHEMES:
        if n == 0:
            raise DegenerateInputError("softmax weighting needs at least one context token")
        if target_in_softmax:
            if raw.target_score is None:
                raise InputError("joint softmax requires raw scores with a target score")
            joint = softmax(np.append(np.asarray(raw.scores, dtype=np.float64), raw.target_score))
            return TokenWeights(
                scheme=scheme,
                positions=raw.positions,
                weights=joint[:-1],
                target_weight=float(joint[-1]),
                include_target=True,
                target_in_softmax=True,
            )
        weights = _exact_unit_sum(softmax(np.asarray(raw.scores, dtype=np.float64)))
        return TokenWeights(
            scheme=scheme,
            positions=raw.positions,
            weights=weights,
            target_weight=1.0 if include_target else 0.0,
            include_target=include_target,
        )
    if scheme == UNIFORM_ONE:
        values = np.ones(n, dtype=np.float64)
    else:
        values = np.zeros(n, dtype=np.float64)
    return TokenWeights(
        scheme=scheme,
        positions=raw.positions,
        weights=values,
        target_weight=1.0,
        include_target=True,
    )


def masked_token_ids(
    sent: TokenizedSentence, mask_token_id: int
) -> tuple[list[int], tuple[int, int], int]:
    """Collapse the target span to one mask token.

    Returns the masked id sequence, the mask span within it, and the
    original target's first subword id (the vocab_prob objective).
    """
    if sent.target_span is None:
        raise InputError("sentence has no target span to mask")
    a, b = sent.target_span
    ids = list(sent.token_ids[:a]) + [mask_token_id] + list(sent.token_ids[b:])
    return ids, (a, a + 1), sent.token_ids[a]


def map_masked_to_original(raw: RawScores, target_span: tuple[int, int]) -> RawScores:
    """Re-key masked-sentence positions to original-sentence positions."""
    a, b = target_span
    offset = b - a - 1
    positions = tuple(p if p < a else p + offset for p in raw.positions)
    return RawScores(positions=positions, scores=raw.scores, target_score=raw.target_score)


def raw_influence_scores(
    backend: EncoderBackend,
    sent: TokenizedSentence,
    original_output: EncoderOutput,
    scheme: str,
    layer_range: LayerRange | None = None,
    ig_config: IgConfig | None = None,
    include_specials: bool = False,
) -> RawScores:
    """Raw per-context-token scores for one instance, keyed by positions of
    the original sentence; all-zero for the schemes that ignore influence."""
    if sent.target_span is None:
        raise InputError("sentence has no target span")
    if scheme == ATTENTION:
        if layer_range is None:
            layer_range = default_layer_range(backend.n_layers)
        return attention_scores(original_output, sent.target_span, layer_range, include_specials)
    if scheme == INTEGRATED_GRADIENTS:
        config = ig_config if ig_config is not None else IgConfig()
        ids, mask_span, first_subword = masked_token_ids(sent, backend.mask_token_id)
        raw = integrated_gradients(
            backend, ids, mask_span, config,
            target_token_id=first_subword, include_specials=include_specials,
        )
        return map_masked_to_original(raw, sent.target_span)
    positions = sent.context_positions(include_specials)
    return RawScores(positions=positions, scores=np.zeros(len(positions)))


def compute_token_weights(
    backend: EncoderBackend,
    sent: TokenizedSentence,
    original_output: EncoderOutput,
    scheme: str,
    include_target: bool = True,
    layer_range: LayerRange | None = None,
    ig_config: IgConfig | None = None,
    include_specials: bool = False,
) -> TokenWeights:
    """Weights for one instance, computed once on the original sentence."""
    raw = raw_influence_scores(
        backend, sent, original_output, scheme,
        layer_range=layer_range, ig_config=ig_config, include_specials=include_specials,
    )
    return normalize(raw, scheme, include_target)
