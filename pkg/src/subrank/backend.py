"""Backend contract: what any encoder must expose to drive the pipeline.

The ranking and attribution code never touches model internals; it consumes
:class:`EncoderOutput` (per-layer hidden states, per-layer/per-head attention
probabilities, vocabulary logits) and, for gradient-based attribution, asks
the backend for embedding lookup, embedding-level injection and exact
gradients with respect to injected embeddings. The bundled reference encoder
implements all of it; an adapter wrapping a real pretrained model satisfies
the same :class:`EncoderBackend` protocol and the contract test suite in
``tests/test_backend_contract.py`` runs against it unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import InputError

VOCAB_PROB = "vocab_prob"
L2_NORM = "l2_norm"
TARGET_MODES = (VOCAB_PROB, L2_NORM)


@dataclass(frozen=True)
class EncoderOutput:
    """Everything one forward pass exposes.

    hidden: ``n_layers + 1`` arrays of shape (seq_len, d_model); index 0 is
        the embedding-layer output, index ``l`` the output of layer ``l``.
    attentions: ``n_layers`` arrays of shape (n_heads, seq_len, seq_len)
        holding post-softmax attention probabilities, captured per head
        before the output projection.
    logits: (seq_len, vocab_size) vocabulary scores at every position.
    """

    hidden: tuple[np.ndarray, ...]
    attentions: tuple[np.ndarray, ...]
    logits: np.ndarray

    @property
    def n_layers(self) -> int:
        return len(self.attentions)

    @property
    def seq_len(self) -> int:
        return self.logits.shape[0]


@dataclass(frozen=True)
class TargetFunction:
    """Scalar model output to attribute: a vocabulary probability or a norm.

    ``vocab_prob`` is the softmax probability of ``token_id`` at ``position``;
    ``l2_norm`` is the Euclidean norm of the final-layer hidden vector at
    ``position`` (for backends whose outputs are not vocabulary
    distributions).
    """

    mode: str
    position: int
    token_id: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in TARGET_MODES:
            raise InputError(f"unknown target-function mode {self.mode!r}")
        if self.mode == VOCAB_PROB and self.token_id is None:
            raise InputError("vocab_prob target function requires token_id")


def softmax(values: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    shifted = values - values.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def evaluate_target(output: EncoderOutput, fn: TargetFunction) -> float:
    """Evaluate a target function on any backend's output."""
    seq_len = output.seq_len
    if not 0 <= fn.position < seq_len:
        raise InputError(
            f"target position {fn.position} outside sequence of length {seq_len}"
        )
    if fn.mode == VOCAB_PROB:
        row = output.logits[fn.position]
        if not 0 <= fn.token_id < row.shape[0]:
            raise InputError(f"token id {fn.token_id} outside vocabulary")
        return float(softmax(row)[fn.token_id])
    return float(np.linalg.norm(output.hidden[-1][fn.position]))


@runtime_checkable
class EncoderBackend(Protocol):
    """Capabilities a backend must provide.

    Attributes
    ----------
    n_layers, d_model, max_positions: architecture facts the pipeline needs
        for layer ranges and input validation.
    pad_token_id, mask_token_id: ids of the backend's pad and mask tokens
        (the gradient-attribution baseline and the target placeholder).
    supports_gradients: False for adapters that can only serve attention
        weighting; gradient attribution then raises ``CapabilityError``.
    """

    n_layers: int
    d_model: int
    max_positions: int
    pad_token_id: int
    mask_token_id: int
    supports_gradients: bool

    def encode(self, token_ids: Sequence[int]) -> EncoderOutput: ...

    def lookup_embeddings(self, token_ids: Sequence[int]) -> np.ndarray: ...

    def encode_from_embeddings(self, token_embeddings: np.ndarray) -> EncoderOutput: ...

    def gradient_wrt_embeddings(
        self, token_embeddings: np.ndarray, fn: TargetFunction
    ) -> np.ndarray: ...
