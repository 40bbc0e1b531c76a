"""Deterministic reference transformer encoder.

A small post-layer-norm encoder that stands in for pretrained models at desk
scale. Everything is 64-bit floats and every weight comes from a SplitMix64
stream in a fixed fill order, so two encoders built from equal configs are
bit-identical — across runs, threads and implementation languages.

Architecture, fixed on purpose so there is nothing to tune or misread:

* token embedding lookup (or injected embeddings) + sinusoidal positions
* per layer: multi-head scaled dot-product self-attention, residual,
  layer norm (eps 1e-5); ReLU feed-forward, residual, layer norm
* logits through the tied (transposed) embedding matrix
* all biases zero, all layer-norm gains 1 / offsets 0 — structural
  constants, not parameters

Positions are added after embedding injection, so gradient attribution over
injected embeddings interpolates token identity only, never position.
Attention probabilities are captured per layer and head right after the
softmax, before the heads are concatenated and projected.

The forward pass is written with explicit caches and the backward pass is
hand-derived reverse mode, giving exact gradients of a target function with
respect to injected embeddings (checked against central finite differences
in the test suite).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backend import (
    VOCAB_PROB,
    EncoderOutput,
    TargetFunction,
    softmax,
)
from .errors import ConfigurationError, InputError
from .rng import SplitMix64

LAYER_NORM_EPS = 1e-5
WEIGHT_FILE_MAGIC = b"SUBRANK1"


@dataclass(frozen=True)
class EncoderConfig:
    """Shape and seed of a reference encoder."""

    vocab_size: int
    d_model: int
    n_heads: int
    n_layers: int
    ffn_dim: int
    max_positions: int
    seed: int

    def __post_init__(self) -> None:
        for name in ("vocab_size", "d_model", "n_heads", "n_layers", "ffn_dim", "max_positions"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
        if self.d_model % self.n_heads != 0:
            raise ConfigurationError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if self.n_layers < 4:
            raise ConfigurationError(
                f"n_layers must be at least 4 so a default layer range exists, got {self.n_layers}"
            )
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


@dataclass(frozen=True)
class LayerWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    def matrices(self) -> tuple[np.ndarray, ...]:
        return (self.wq, self.wk, self.wv, self.wo, self.w1, self.w2)


def sinusoidal_positions(max_positions: int, d_model: int) -> np.ndarray:
    """Fixed sine/cosine position table, (max_positions, d_model)."""
    position = np.arange(max_positions, dtype=np.float64)[:, None]
    half = np.arange(0, d_model, 2, dtype=np.float64)
    div = np.exp(half * (-np.log(10000.0) / d_model))
    table = np.zeros((max_positions, d_model), dtype=np.float64)
    table[:, 0::2] = np.sin(position * div)
    table[:, 1::2] = np.cos(position * div[: d_model // 2])
    return table


def attention_probabilities(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax over attention scores (seam for tests)."""
    return softmax(scores)


def _layer_norm(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise layer norm with unit gain; returns (normalized, inv_std)."""
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    return centered * inv_std, inv_std


def _layer_norm_backward(dy: np.ndarray, y: np.ndarray, inv_std: np.ndarray) -> np.ndarray:
    dy_mean = dy.mean(axis=-1, keepdims=True)
    proj = (dy * y).mean(axis=-1, keepdims=True)
    return inv_std * (dy - dy_mean - y * proj)


def _target_gradient_seed(
    logits: np.ndarray,
    final_hidden: np.ndarray,
    embedding: np.ndarray,
    fn: TargetFunction,
) -> np.ndarray:
    """Gradient of the target function w.r.t. the final hidden states.

    Module-level so tests can wrap it (e.g. scale the target by a constant
    and assert the gradient scales linearly).
    """
    d_final = np.zeros_like(final_hidden)
    if fn.mode == VOCAB_PROB:
        probs = softmax(logits[fn.position])
        p_target = probs[fn.token_id]
        d_logits_row = -p_target * probs
        d_logits_row[fn.token_id] += p_target
        d_final[fn.position] = d_logits_row @ embedding
    else:
        vector = final_hidden[fn.position]
        norm = np.linalg.norm(vector)
        if norm > 0.0:
            d_final[fn.position] = vector / norm
    return d_final


class ReferenceEncoder:
    """Deterministic encoder satisfying the :class:`EncoderBackend` protocol.

    Immutable after construction; every method is a pure function of
    (weights, input) and safe to call concurrently.
    """

    supports_gradients = True
    pad_token_id = 0
    mask_token_id = 4

    def __init__(self, config: EncoderConfig):
        self.config = config
        stream = SplitMix64(config.seed)
        self.embedding = stream.fill(config.vocab_size, config.d_model)
        layers = []
        for _ in range(config.n_layers):
            layers.append(
                LayerWeights(
                    wq=stream.fill(config.d_model, config.d_model),
                    wk=stream.fill(config.d_model, config.d_model),
                    wv=stream.fill(config.d_model, config.d_model),
                    wo=stream.fill(config.d_model, config.d_model),
                    w1=stream.fill(config.d_model, config.ffn_dim),
                    w2=stream.fill(config.ffn_dim, config.d_model),
                )
            )
        self.layers = tuple(layers)
        self.positions = sinusoidal_positions(config.max_positions, config.d_model)
        self._freeze()

    def _freeze(self) -> None:
        self.embedding.setflags(write=False)
        self.positions.setflags(write=False)
        for layer in self.layers:
            for matrix in layer.matrices():
                matrix.setflags(write=False)

    # -- architecture facts -------------------------------------------------

    @property
    def n_layers(self) -> int:
        return self.config.n_layers

    @property
    def d_model(self) -> int:
        return self.config.d_model

    @property
    def max_positions(self) -> int:
        return self.config.max_positions

    # -- forward ------------------------------------------------------------

    def lookup_embeddings(self, token_ids: Sequence[int]) -> np.ndarray:
        ids = self._check_token_ids(token_ids)
        return self.embedding[ids].copy()

    def encode(self, token_ids: Sequence[int]) -> EncoderOutput:
        """Full forward pass from token ids."""
        output, _ = self._forward(self.lookup_embeddings(token_ids))
        return output

    def encode_from_embeddings(self, token_embeddings: np.ndarray) -> EncoderOutput:
        """Forward pass with the embedding lookup replaced by the caller's
        matrix; sinusoidal positions are still added afterwards."""
        output, _ = self._forward(self._check_embeddings(token_embeddings))
        return output

    def gradient_wrt_embeddings(
        self, token_embeddings: np.ndarray, fn: TargetFunction
    ) -> np.ndarray:
        """Exact gradient of the target function w.r.t. every injected
        embedding entry, via reverse-mode differentiation."""
        x = self._check_embeddings(token_embeddings)
        output, caches = self._forward(x, keep_caches=True)
        self._check_target(fn, output.seq_len)
        d_hidden = _target_gradient_seed(output.logits, output.hidden[-1], self.embedding, fn)
        return self._backward(d_hidden, caches)

    # -- internals ----------------------------------------------------------

    def _check_token_ids(self, token_ids: Sequence[int]) -> np.ndarray:
        ids = np.asarray(list(token_ids), dtype=np.int64)
        if ids.ndim != 1 or ids.size == 0:
            raise InputError("token_ids must be a non-empty 1-d sequence")
        if ids.size > self.config.max_positions:
            raise InputError(
                f"sequence length {ids.size} exceeds max_positions {self.config.max_positions}"
            )
        if ids.min() < 0 or ids.max() >= self.config.vocab_size:
            raise InputError("token id outside vocabulary range")
        return ids

    def _check_embeddings(self, token_embeddings: np.ndarray) -> np.ndarray:
        x = np.asarray(token_embeddings, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.config.d_model:
            raise InputError(
                f"embeddings must be (seq_len, {self.config.d_model}), got {x.shape}"
            )
        if not 1 <= x.shape[0] <= self.config.max_positions:
            raise InputError(
                f"sequence length {x.shape[0]} outside [1, {self.config.max_positions}]"
            )
        return x

    @staticmethod
    def _check_target(fn: TargetFunction, seq_len: int) -> None:
        if not 0 <= fn.position < seq_len:
            raise InputError(f"target position {fn.position} outside sequence of length {seq_len}")

    def _forward(self, injected: np.ndarray, keep_caches: bool = False):
        cfg = self.config
        n_heads, d_head = cfg.n_heads, cfg.d_model // cfg.n_heads
        scale = 1.0 / np.sqrt(d_head)
        seq_len = injected.shape[0]

        x = injected + self.positions[:seq_len]
        hidden = [x.copy()]
        attentions = []
        caches = []

        for layer in self.layers:
            q = x @ layer.wq
            k = x @ layer.wk
            v = x @ layer.wv
            probs = np.empty((n_heads, seq_len, seq_len), dtype=np.float64)
            context = np.empty((seq_len, cfg.d_model), dtype=np.float64)
            for h in range(n_heads):
                cols = slice(h * d_head, (h + 1) * d_head)
                scores = (q[:, cols] @ k[:, cols].T) * scale
                probs[h] = attention_probabilities(scores)
                context[:, cols] = probs[h] @ v[:, cols]
            attn_out = context @ layer.wo
            residual1 = x + attn_out
            normed1, inv_std1 = _layer_norm(residual1)
            pre_act = normed1 @ layer.w1
            activated = np.maximum(pre_act, 0.0)
            ffn_out = activated @ layer.w2
            residual2 = normed1 + ffn_out
            normed2, inv_std2 = _layer_norm(residual2)

            hidden.append(normed2.copy())
            attentions.append(probs)
            if keep_caches:
                caches.append(
                    dict(q=q, k=k, v=v, probs=probs, normed1=normed1,
                         inv_std1=inv_std1, pre_act=pre_act, activated=activated,
                         normed2=normed2, inv_std2=inv_std2)
                )
            x = normed2

        logits = x @ self.embedding.T
        output = EncoderOutput(hidden=tuple(hidden), attentions=tuple(attentions), logits=logits)
        return output, caches

    def _backward(self, d_hidden: np.ndarray, caches: list[dict]) -> np.ndarray:
        cfg = self.config
        n_heads, d_head = cfg.n_heads, cfg.d_model // cfg.n_heads
        scale = 1.0 / np.sqrt(d_head)
        dx = d_hidden

        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            d_res2 = _layer_norm_backward(dx, cache["normed2"], cache["inv_std2"])
            d_normed1 = d_res2.copy()
            d_activated = d_res2 @ layer.w2.T
            d_pre_act = d_activated * (cache["pre_act"] > 0.0)
            d_normed1 += d_pre_act @ layer.w1.T
            d_res1 = _layer_norm_backward(d_normed1, cache["normed1"], cache["inv_std1"])

            dx = d_res1.copy()
            d_context = d_res1 @ layer.wo.T
            q, k, v, probs = cache["q"], cache["k"], cache["v"], cache["probs"]
            dq = np.empty_like(q)
            dk = np.empty_like(k)
            dv = np.empty_like(v)
            for h in range(n_heads):
                cols = slice(h * d_head, (h + 1) * d_head)
                d_ctx_h = d_context[:, cols]
                a = probs[h]
                d_probs = d_ctx_h @ v[:, cols].T
                dv[:, cols] = a.T @ d_ctx_h
                d_scores = a * (d_probs - (d_probs * a).sum(axis=-1, keepdims=True))
                dq[:, cols] = (d_scores @ k[:, cols]) * scale
                dk[:, cols] = (d_scores.T @ q[:, cols]) * scale
            dx += dq @ layer.wq.T + dk @ layer.wk.T + dv @ layer.wv.T

        return dx

    # -- persistence --------------------------------------------------------

    def weight_checksum(self) -> str:
        """SHA-256 over all filled weights in fill order (hex digest)."""
        digest = hashlib.sha256()
        digest.update(self.embedding.tobytes())
        for layer in self.layers:
            for matrix in layer.matrices():
                digest.update(matrix.tobytes())
        return digest.hexdigest()

    def save_weights(self, path) -> None:
        """Flat binary dump: magic, config as little-endian u64, weights as
        little-endian float64 in the fill order."""
        cfg = self.config
        with open(path, "wb") as fh:
            fh.write(WEIGHT_FILE_MAGIC)
            fh.write(
                struct.pack(
                    "<7Q",
                    cfg.vocab_size, cfg.d_model, cfg.n_heads,
                    cfg.n_layers, cfg.ffn_dim, cfg.max_positions, cfg.seed,
                )
            )
            fh.write(self.embedding.astype("<f8").tobytes())
            for layer in self.layers:
                for matrix in layer.matrices():
                    fh.write(matrix.astype("<f8").tobytes())

    @classmethod
    def load_weights(cls, path) -> "ReferenceEncoder":
        with open(path, "rb") as fh:
            magic = fh.read(len(WEIGHT_FILE_MAGIC))
            if magic != WEIGHT_FILE_MAGIC:
                raise InputError(f"not a weight file (bad magic {magic!r})")
            header = fh.read(7 * 8)
            if len(header) != 56:
                raise InputError("truncated weight file header")
            fields = struct.unpack("<7Q", header)
            config = EncoderConfig(*[int(f) for f in fields])
            blob = np.frombuffer(fh.read(), dtype="<f8")

        sizes = [config.vocab_size * config.d_model]
        per_layer = (
            [config.d_model * config.d_model] * 4
            + [config.d_model * config.ffn_dim, config.ffn_dim * config.d_model]
        )
        sizes += per_layer * config.n_layers
        if blob.size != sum(sizes):
            raise InputError(
                f"weight payload has {blob.size} floats, expected {sum(sizes)}"
            )

        encoder = cls.__new__(cls)
        encoder.config = config
        offset = config.vocab_size * config.d_model
        encoder.embedding = blob[:offset].reshape(config.vocab_size, config.d_model).copy()
        layers = []
        shapes = [(config.d_model, config.d_model)] * 4
        shapes += [(config.d_model, config.ffn_dim), (config.ffn_dim, config.d_model)]
        for _ in range(config.n_layers):
            mats = []
            for shape in shapes:
                count = shape[0] * shape[1]
                mats.append(blob[offset : offset + count].reshape(shape).copy())
                offset += count
            layers.append(LayerWeights(*mats))
        encoder.layers = tuple(layers)
        encoder.positions = sinusoidal_positions(config.max_positions, config.d_model)
        encoder._freeze()
        return encoder
