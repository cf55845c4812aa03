import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotune import kernels
from cotune.kernels import python_backend as py

compiled = kernels.compiled_backend
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def test_backend_name_reflects_selection():
    assert kernels.BACKEND_NAME in ("compiled", "python")
    assert (kernels.BACKEND_NAME == "compiled") == (compiled is not None)


def test_python_kernel_matches_definition():
    rng = np.random.default_rng(0)
    X1, X2 = rng.random((4, 3)), rng.random((5, 3))
    ls, sf = np.array([0.5, 1.0, 2.0]), 1.7
    K = py.sq_exp_kernel(X1, X2, ls, sf)
    for i in range(4):
        for j in range(5):
            assert K[i, j] == pytest.approx(sf * np.exp(-0.5 * np.sum(((X1[i] - X2[j]) / ls) ** 2)), rel=1e-14)


def test_beta_counts_small_cases():
    assert py.beta_counts(np.array([10.0, 10.0, 10.0, 0.0]), 1, 1.0) == (0, 1)
    assert py.beta_counts(np.array([3.0, 2.9, 0.0, 0.0]), 7, 1.0) == (6, 2)
    assert py.beta_counts(np.array([0.5, 1.5, 2.5]), 0, 1.0) == (1 + 2 + 3, 0)
    assert py.beta_counts(np.array([]), 7, 1.0) == (0, 0)


@needs_ext
@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 6), st.integers(1, 9), st.integers(1, 9))
def test_sq_exp_kernel_backends_agree(seed, d, n1, n2):
    rng = np.random.default_rng(seed)
    X1, X2 = rng.normal(size=(n1, d)), rng.normal(size=(n2, d))
    ls, sf = rng.uniform(0.05, 5.0, d), float(rng.uniform(0.1, 3.0))
    np.testing.assert_allclose(compiled.sq_exp_kernel(X1, X2, ls, sf), py.sq_exp_kernel(X1, X2, ls, sf),
                               rtol=1e-12, atol=1e-300)


@needs_ext
@settings(max_examples=200, deadline=None)
@given(st.lists(st.one_of(st.just(0.0), st.floats(0.0, 50.0)), max_size=40), st.integers(0, 50),
       st.floats(0.01, 10.0))
def test_beta_counts_backends_agree(entries, buf, rfactor):
    arr = np.array(entries, dtype=float)
    assert compiled.beta_counts(arr, buf, rfactor) == py.beta_counts(arr, buf, rfactor)


@needs_ext
@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_objective_backends_agree(seed):
    from cotune.target_sim import SyntheticSystem

    system = SyntheticSystem(seed=seed % 1000)
    p = system.params
    rng = np.random.default_rng(seed)
    n = 17
    k = rng.random((n, p.knob_dims))
    b = (rng.random((n, p.index_bits)) < 0.5).astype(float)
    q = rng.integers(0, p.rewrites, (n, p.queries))
    args = (system.mu_bit, system.gains, p.lam, system.speedups, system.base_costs)
    np.testing.assert_allclose(compiled.synthetic_objective(k, b, q, *args), py.synthetic_objective(k, b, q, *args),
                               rtol=1e-12)
