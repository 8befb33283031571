import numpy as np
import pytest

from fedcast import kernels
from fedcast import model as mo
from fedcast.kernels import reference
from fedcast.numerics import make_rng

compiled = pytest.importorskip("fedcast.kernels._core", reason="compiled kernels not built")


@pytest.mark.parametrize("hidden,lookback", [(2, 1), (3, 4), (25, 12)])
def test_backend_parity(hidden, lookback):
    dims = mo.ModelDims(hidden=hidden, lookback=lookback, lookahead=1,
                        n_features=7, mlp_hidden=(10, 5))
    rng = make_rng(hidden * 100 + lookback)
    p = mo.init_params(rng, dims)
    x = rng.normal(size=(5, dims.lookback, dims.input_size))
    dy = rng.normal(size=5)
    packed = mo._pack(p, dims)

    y_c, cache_c = compiled.forward_batch(x, *packed)
    y_r, cache_r = reference.forward_batch(x, *packed)
    assert np.allclose(y_c, y_r, rtol=1e-12, atol=1e-14)

    g_c = mo._unpack_grads(compiled.backward_batch(cache_c, dy), dims).flatten()
    g_r = mo._unpack_grads(reference.backward_batch(cache_r, dy), dims).flatten()
    assert np.allclose(g_c, g_r, rtol=1e-10, atol=1e-12)


def test_active_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")
