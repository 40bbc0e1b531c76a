"""Contract suite any encoder backend must satisfy.

Parametrized over backend factories: an adapter wrapping a real pretrained
model can be added to BACKENDS and every check here applies unchanged.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from subrank import EncoderBackend, ReferenceEncoder, TargetFunction
from conftest import encoder_config

BACKENDS = {
    "reference": lambda: ReferenceEncoder(encoder_config(n_layers=5, vocab_size=64)),
}


@pytest.fixture(params=sorted(BACKENDS), scope="module")
def backend(request):
    return BACKENDS[request.param]()


TOKEN_IDS = [2, 11, 21, 31, 41, 3]


class TestBackendContract:
    def test_satisfies_the_protocol(self, backend):
        assert isinstance(backend, EncoderBackend)

    def test_attention_rows_are_distributions(self, backend):
        out = backend.encode(TOKEN_IDS)
        assert len(out.attentions) == backend.n_layers
        for tensor in out.attentions:
            np.testing.assert_allclose(tensor.sum(axis=-1), 1.0, atol=1e-9)
            assert tensor.min() >= 0.0 and tensor.max() <= 1.0

    def test_hidden_states_are_finite_and_consistent(self, backend):
        out = backend.encode(TOKEN_IDS)
        assert len(out.hidden) == backend.n_layers + 1
        for state in out.hidden:
            assert state.shape == (len(TOKEN_IDS), backend.d_model)
            assert np.isfinite(state).all()
        assert np.isfinite(out.logits).all()

    def test_injection_reproduces_encode(self, backend):
        direct = backend.encode(TOKEN_IDS)
        injected = backend.encode_from_embeddings(backend.lookup_embeddings(TOKEN_IDS))
        np.testing.assert_array_equal(direct.logits, injected.logits)
        for a, b in zip(direct.hidden, injected.hidden):
            np.testing.assert_array_equal(a, b)

    def test_gradients_available_when_promised(self, backend):
        if not backend.supports_gradients:
            pytest.skip("backend does not promise gradients")
        x = backend.lookup_embeddings(TOKEN_IDS)
        grad = backend.gradient_wrt_embeddings(x, TargetFunction("l2_norm", position=1))
        assert grad.shape == x.shape
        assert np.isfinite(grad).all()

    def test_bit_identical_across_thread_schedules(self, backend):
        def run(_):
            out = backend.encode(TOKEN_IDS)
            return out.logits.tobytes(), tuple(h.tobytes() for h in out.hidden)

        baseline = run(0)
        with ThreadPoolExecutor(max_workers=8) as pool:
            for result in pool.map(run, range(16)):
                assert result == baseline
