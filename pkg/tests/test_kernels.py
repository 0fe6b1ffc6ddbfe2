import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vibromollow import kernels


def _random_terms(seed, n, m):
    rng = np.random.default_rng(seed)
    amp = rng.normal(size=n) + 1j * rng.normal(size=n)
    decay = rng.uniform(0.01, 3.0, n)
    freq = rng.uniform(-20, 20, n)
    omega = np.linspace(-25, 25, m)
    return amp, decay, freq, omega


@given(seed=st.integers(0, 10_000), n=st.integers(1, 40), m=st.integers(1, 300))
def test_lorentzian_backends_agree(seed, n, m):
    a, d, f, w = _random_terms(seed, n, m)
    x = kernels.lorentzian_sum_jit(a, d, f, w)
    y = kernels.lorentzian_sum_numpy(a, d, f, w)
    np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12 * np.abs(y).max())


@given(seed=st.integers(0, 10_000), n=st.integers(1, 40), m=st.integers(1, 300))
def test_exp_sum_backends_agree(seed, n, m):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n) + 1j * rng.normal(size=n)
    r = -rng.uniform(0, 2, n) + 1j * rng.uniform(-5, 5, n)
    t = np.linspace(0, 10, m)
    np.testing.assert_allclose(kernels.exp_sum_jit(c, r, t), kernels.exp_sum_numpy(c, r, t),
                               rtol=1e-12, atol=1e-12 * np.abs(c).sum())


def test_numpy_chunking_matches_unchunked(monkeypatch):
    a, d, f, w = _random_terms(3, 50, 1000)
    full = kernels.lorentzian_sum_numpy(a, d, f, w)
    monkeypatch.setattr(kernels, "_CHUNK_ELEMENTS", 64)
    np.testing.assert_allclose(kernels.lorentzian_sum_numpy(a, d, f, w), full, rtol=1e-13,
                               atol=1e-14 * np.abs(full).max())


def test_single_lorentzian_closed_form():
    w = np.linspace(-5, 5, 11)
    out = kernels.lorentzian_sum(np.array([1.0 + 0j]), np.array([0.5]), np.array([1.0]), w)
    np.testing.assert_allclose(out, 2 * 0.5 / (0.25 + (1 - w) ** 2), rtol=1e-14)


def test_backend_flag(monkeypatch):
    monkeypatch.setattr(kernels, "USE_JIT", False)
    assert kernels.backend() == "numpy"
    monkeypatch.setenv("VIBROMOLLOW_DISABLE_JIT", "1")
    assert not kernels._jit_requested()
    monkeypatch.setenv("VIBROMOLLOW_DISABLE_JIT", "0")
    assert kernels._jit_requested()
