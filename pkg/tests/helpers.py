"""Shared test scaffolding: fake backends and tiny corpora.

Numerical oracles stay inside the test files that use them so each check
remains an independent transcription; only construction helpers live here.
"""

import numpy as np

from subrank import EncoderConfig, EncoderOutput, ReferenceEncoder, TargetFunction, build_vocabulary


def make_stack(words, n_layers=6, seed=42, d_model=16, n_heads=2, ffn_dim=24, max_positions=64):
    """(vocabulary, reference encoder) pair with matching vocabulary size."""
    vocab = build_vocabulary(words)
    encoder = ReferenceEncoder(
        EncoderConfig(
            vocab_size=len(vocab), d_model=d_model, n_heads=n_heads,
            n_layers=n_layers, ffn_dim=ffn_dim, max_positions=max_positions, seed=seed,
        )
    )
    return vocab, encoder


class FakeLinearBackend:
    """Backend whose target function is exactly F(x) = sum(coeffs * x).

    The gradient is the constant coefficient matrix, the pad embedding is
    zero, and token embeddings are rows of a fixed table — which makes
    path-integral attributions exact in closed form for any step count.
    """

    supports_gradients = True
    pad_token_id = 0
    mask_token_id = 4
    n_layers = 1
    max_positions = 1024

    def __init__(self, table: np.ndarray, coeffs: np.ndarray):
        self.table = np.asarray(table, dtype=np.float64)
        self.coeffs = np.asarray(coeffs, dtype=np.float64)
        self.d_model = self.table.shape[1]

    def lookup_embeddings(self, token_ids):
        return self.table[np.asarray(list(token_ids), dtype=np.int64)].copy()

    def gradient_wrt_embeddings(self, token_embeddings, fn: TargetFunction):
        return self.coeffs[: token_embeddings.shape[0]].copy()

    def value(self, token_embeddings):
        return float((self.coeffs[: token_embeddings.shape[0]] * token_embeddings).sum())

    def encode(self, token_ids):  # pragma: no cover - not needed by IG
        raise NotImplementedError

    def encode_from_embeddings(self, token_embeddings):  # pragma: no cover
        raise NotImplementedError


class GradientlessBackend:
    """Attention-only backend used to exercise the capability error."""

    supports_gradients = False
    pad_token_id = 0
    mask_token_id = 4
    n_layers = 1
    d_model = 4
    max_positions = 16

    def lookup_embeddings(self, token_ids):
        raise AssertionError("should not be reached")

    def gradient_wrt_embeddings(self, token_embeddings, fn):
        raise AssertionError("should not be reached")


def fabricated_output(attentions, d_model=4, vocab_size=8, seed=0) -> EncoderOutput:
    """EncoderOutput with prescribed attention tensors and filler states."""
    attentions = tuple(np.asarray(a, dtype=np.float64) for a in attentions)
    seq_len = attentions[0].shape[-1]
    rng = np.random.default_rng(seed)
    hidden = tuple(rng.standard_normal((seq_len, d_model)) for _ in range(len(attentions) + 1))
    logits = rng.standard_normal((seq_len, vocab_size))
    return EncoderOutput(hidden=hidden, attentions=attentions, logits=logits)


def row_stochastic(rng, n_heads, seq_len) -> np.ndarray:
    """Random attention tensor whose rows sum to one."""
    raw = rng.random((n_heads, seq_len, seq_len)) + 0.05
    return raw / raw.sum(axis=-1, keepdims=True)
