"""Pure-Python/numpy reference kernels. Same signatures as the compiled module."""
import math

import numpy as np
from scipy.spatial.distance import cdist

MU_SET = 0.3
MU_UNSET = 0.7


def sq_exp_kernel(X1, X2, lengthscales, variance):
    A = np.asarray(X1, dtype=float) / lengthscales
    B = np.asarray(X2, dtype=float) / lengthscales
    return variance * np.exp(-0.5 * cdist(A, B, "sqeuclidean"))


def beta_counts(entries, buffer_size, rfactor):
    """(S, F) over the last ``buffer_size`` entries (all entries if <= 0).

    Positive rewards add round-half-away-from-zero(reward / rfactor) to S;
    everything else adds one to F.
    """
    window = entries[-buffer_size:] if 0 < buffer_size < len(entries) else entries
    S = 0
    F = 0
    for r in window:
        if r > 0:
            S += int(math.floor(r / rfactor + 0.5))
        else:
            F += 1
    return S, F


def synthetic_objective(knobs, bits, queries, mu_bit, gains, lam, speedups, base_costs):
    """Noise-free objective for a batch of joint settings.

    knobs (n, dk) reals, bits (n, nb) 0/1, queries (n, nq) rewrite indices.
    """
    knobs = np.asarray(knobs, dtype=float)
    bits = np.asarray(bits, dtype=float)
    queries = np.asarray(queries, dtype=np.int64)
    gains = np.asarray(gains, dtype=float)
    mu = np.where(bits[:, mu_bit] > 0.5, MU_SET, MU_UNSET)
    knob_term = ((knobs - mu) ** 2).sum(1)
    total = gains.sum()
    p = bits @ gains
    q = bits @ (gains * gains)
    index_term = total - p + lam * 0.5 * (p * p - q) / total
    s = np.asarray(speedups, dtype=float)
    query_term = (np.asarray(base_costs, dtype=float)[None, :]
                  * s[np.arange(s.shape[0])[None, :], queries]).sum(1)
    return knob_term + index_term + query_term
