"""Layer-concatenated token representations, weighted similarity, ranking.

A token's representation is the concatenation of its hidden vectors over a
layer range (multi-token spans are mean-pooled within each layer first, so
candidates with different subword counts stay comparable). A substitution is
scored as the target-position cosine times the target weight plus the
weighted sum of context-token cosines over aligned positions, with weights
computed once from the original sentence. Candidates are ranked by score,
ties broken by candidate string so the order never depends on input order.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .attribution import (
    IgConfig,
    LayerRange,
    TokenWeights,
    compute_token_weights,
    default_layer_range,
)
from .backend import EncoderBackend, EncoderOutput
from .errors import DegenerateInputError, InternalConsistencyError, MultiwordCandidateError
from .tokenizer import Alignment, TokenizedSentence, Vocabulary, locate_target, substitute, tokenize

EXCLUDED_MULTIWORD = "multiword"


class _DegenerateCounter:
    """Counts zero-vector cosine fallbacks instead of raising."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def bump(self) -> None:
        with self._lock:
            self._count += 1

    def value(self) -> int:
        with self._lock:
            return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


degenerate_cosines = _DegenerateCounter()


def represent(output: EncoderOutput, span: tuple[int, int], layer_range: LayerRange) -> np.ndarray:
    """Concatenate the span's hidden vectors over the layer range.

    Multi-token spans are mean-pooled within each layer before
    concatenation; the result always has length width * d_model.
    """
    layer_range.check_against(output.n_layers)
    a, b = span
    parts = []
    for layer in range(layer_range.start, layer_range.end + 1):
        rows = output.hidden[layer][a:b]
        parts.append(rows[0] if b - a == 1 else rows.mean(axis=0))
    return np.concatenate(parts)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; a zero vector yields 0 and bumps the degenerate
    counter. Computed as dot/sqrt(dot*dot) so identical vectors give exactly
    1.0 in float64."""
    if u.shape != v.shape:
        raise InternalConsistencyError(f"cosine over mismatched shapes {u.shape} vs {v.shape}")
    uu = float(np.dot(u, u))
    vv = float(np.dot(v, v))
    if uu == 0.0 or vv == 0.0:
        degenerate_cosines.bump()
        return 0.0
    return float(np.dot(u, v) / np.sqrt(uu * vv))


def substitution_score(
    orig: EncoderOutput,
    subst: EncoderOutput,
    weights: TokenWeights,
    alignment: Alignment,
    layer_range: LayerRange,
) -> float:
    """Weighted token-similarity score between the two sentences."""
    aligned_positions = tuple(i for i, _ in alignment.pairs)
    if aligned_positions != weights.positions:
        raise InternalConsistencyError(
            "alignment context positions do not match the weights' positions"
        )
    score = weights.target_weight * cosine(
        represent(orig, alignment.original_target_span, layer_range),
        represent(subst, alignment.substituted_target_span, layer_range),
    )
    if alignment.pairs:
        sims = np.array(
            [
                cosine(
                    represent(orig, (i, i + 1), layer_range),
                    represent(subst, (j, j + 1), layer_range),
                )
                for i, j in alignment.pairs
            ],
            dtype=np.float64,
        )
        score += float(np.sum(weights.weights * sims))
    return score


@dataclass(frozen=True)
class RankingResult:
    """Candidates of one instance ordered by score (descending, ties by
    candidate string ascending), plus the candidates excluded from scoring."""

    instance_id: str
    scheme: str
    include_target: bool
    layer_range: LayerRange
    ranked: tuple[tuple[str, float], ...]
    excluded: tuple[tuple[str, str], ...]

    @property
    def candidates(self) -> tuple[str, ...]:
        return tuple(candidate for candidate, _ in self.ranked)

    def to_json_dict(self) -> dict:
        return {
            "id": self.instance_id,
            "scheme": self.scheme,
            "include_target": self.include_target,
            "layer_range": [self.layer_range.start, self.layer_range.end],
            "ranked": [{"candidate": c, "score": s} for c, s in self.ranked],
            "excluded": [{"candidate": c, "reason": r} for c, r in self.excluded],
        }


def prepare_sentence(vocab: Vocabulary, sentence: str, char_start: int, char_end: int) -> TokenizedSentence:
    """Tokenize and attach the target span."""
    return locate_target(tokenize(vocab, sentence), char_start, char_end)


def rank_candidates(
    instance,
    backend: EncoderBackend,
    vocab: Vocabulary,
    scheme: str,
    include_target: bool = True,
    layer_range: LayerRange | None = None,
    ig_config: IgConfig | None = None,
) -> RankingResult:
    """Score and order every single-word candidate of one instance.

    The original sentence is encoded once and the token weights are
    computed once; every candidate reuses both. Multiword candidates are
    recorded as excluded and never scored.
    """
    if layer_range is None:
        layer_range = default_layer_range(backend.n_layers)
    sent = prepare_sentence(
        vocab, instance.sentence, instance.target.char_start, instance.target.char_end
    )
    orig_out = backend.encode(sent.token_ids)
    weights = compute_token_weights(
        backend, sent, orig_out, scheme,
        include_target=include_target, layer_range=layer_range, ig_config=ig_config,
    )

    scored: list[tuple[str, float]] = []
    excluded: list[tuple[str, str]] = []
    for candidate in instance.candidates:
        try:
            sub_sent, alignment = substitute(vocab, sent, candidate)
        except MultiwordCandidateError:
            excluded.append((candidate, EXCLUDED_MULTIWORD))
            continue
        sub_out = backend.encode(sub_sent.token_ids)
        scored.append(
            (candidate, substitution_score(orig_out, sub_out, weights, alignment, layer_range))
        )
    if not scored:
        raise DegenerateInputError(
            f"instance {instance.id}: no scoreable candidates "
            f"({len(excluded)} excluded as multiword)"
        )
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return RankingResult(
        instance_id=instance.id,
        scheme=scheme,
        include_target=include_target,
        layer_range=layer_range,
        ranked=tuple(scored),
        excluded=tuple(excluded),
    )
