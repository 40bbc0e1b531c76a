import pytest

from subrank import EncoderConfig, ReferenceEncoder


def encoder_config(**overrides) -> EncoderConfig:
    base = dict(
        vocab_size=60, d_model=16, n_heads=2, n_layers=4,
        ffn_dim=24, max_positions=64, seed=42,
    )
    base.update(overrides)
    return EncoderConfig(**base)


@pytest.fixture(scope="session")
def small_encoder() -> ReferenceEncoder:
    """4-layer, 16-dim encoder shared by read-only tests."""
    return ReferenceEncoder(encoder_config())


@pytest.fixture(scope="session")
def six_layer_encoder() -> ReferenceEncoder:
    return ReferenceEncoder(encoder_config(n_layers=6, vocab_size=80))
