"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` loop and a chunked numpy
version. The numba path is used when numba imports cleanly and the
environment variable ``VIBROMOLLOW_DISABLE_JIT`` is unset or ``0``.
Both paths are importable directly (``*_jit`` / ``*_numpy``) so tests and
the benchmark can compare them.
"""

import os

import numpy as np


def _jit_requested():
    flag = os.environ.get("VIBROMOLLOW_DISABLE_JIT", "0").strip().lower()
    return flag in ("", "0", "false", "no")


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False

USE_JIT = HAVE_NUMBA and _jit_requested()

# numpy path: bound the (terms x points) temporaries to ~16 MB of complex128
_CHUNK_ELEMENTS = 1 << 20


def _chunks(n_terms, n_points):
    step = max(1, _CHUNK_ELEMENTS // max(n_terms, 1))
    for start in range(0, n_points, step):
        yield slice(start, min(start + step, n_points))


def lorentzian_sum_numpy(amp, decay, freq, omega):
    out = np.empty(omega.shape[0], dtype=np.float64)
    for sl in _chunks(amp.shape[0], omega.shape[0]):
        y = freq[:, None] - omega[None, sl]
        num = amp.real[:, None] * decay[:, None] + amp.imag[:, None] * y
        out[sl] = 2.0 * np.sum(num / (decay[:, None] ** 2 + y * y), axis=0)
    return out


def exp_sum_numpy(coef, rate, tau):
    out = np.empty(tau.shape[0], dtype=np.complex128)
    for sl in _chunks(coef.shape[0], tau.shape[0]):
        out[sl] = np.exp(np.outer(tau[sl], rate)) @ coef
    return out


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def lorentzian_sum_jit(amp, decay, freq, omega):
        n_terms = amp.shape[0]
        out = np.zeros(omega.shape[0], dtype=np.float64)
        for i in range(omega.shape[0]):
            w = omega[i]
            acc = 0.0
            for k in range(n_terms):
                d = decay[k]
                y = freq[k] - w
                acc += (amp[k].real * d + amp[k].imag * y) / (d * d + y * y)
            out[i] = 2.0 * acc
        return out

    @numba.njit(cache=True)
    def exp_sum_jit(coef, rate, tau):
        n_terms = coef.shape[0]
        out = np.zeros(tau.shape[0], dtype=np.complex128)
        for i in range(tau.shape[0]):
            t = tau[i]
            acc = 0j
            for k in range(n_terms):
                acc += coef[k] * np.exp(rate[k] * t)
            out[i] = acc
        return out

else:  # pragma: no cover
    lorentzian_sum_jit = lorentzian_sum_numpy
    exp_sum_jit = exp_sum_numpy


def lorentzian_sum(amp, decay, freq, omega):
    """Evaluate ``2 Re sum_k amp_k / (decay_k + i (freq_k - omega))``.

    All rates share one unit (ps^-1 in this package); ``omega`` is the
    evaluation grid.
    """
    amp = np.ascontiguousarray(amp, dtype=np.complex128)
    decay = np.ascontiguousarray(decay, dtype=np.float64)
    freq = np.ascontiguousarray(freq, dtype=np.float64)
    omega = np.ascontiguousarray(omega, dtype=np.float64)
    if USE_JIT:
        return lorentzian_sum_jit(amp, decay, freq, omega)
    return lorentzian_sum_numpy(amp, decay, freq, omega)


def exp_sum(coef, rate, tau):
    """Evaluate ``sum_k coef_k exp(rate_k tau)`` on a grid of ``tau``."""
    coef = np.ascontiguousarray(coef, dtype=np.complex128)
    rate = np.ascontiguousarray(rate, dtype=np.complex128)
    tau = np.ascontiguousarray(tau, dtype=np.float64)
    if USE_JIT:
        return exp_sum_jit(coef, rate, tau)
    return exp_sum_numpy(coef, rate, tau)


def backend():
    return "numba" if USE_JIT else "numpy"
