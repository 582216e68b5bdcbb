# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch-simulation kernel driving a numpy bit generator directly.

Stream contract (shared with the numpy fallback): M*K gamma pairs in
event-major, arm-minor order, then M reward uniforms in event order.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.stdint cimport int64_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_gamma, random_standard_uniform


def simulate_batch(bit_generator, double[::1] alpha, double[::1] beta,
                   double[::1] theta, Py_ssize_t n_events):
    """Simulate one frozen-posterior batch; returns per-arm (impressions, clicks)."""
    cdef Py_ssize_t n_arms = alpha.shape[0]
    if beta.shape[0] != n_arms or theta.shape[0] != n_arms:
        raise ValueError("alpha, beta and theta must have matching lengths")
    if n_events < 0:
        raise ValueError("n_events must be non-negative")

    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid BitGenerator capsule")
    cdef bitgen_t *state = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    impressions_arr = np.zeros(n_arms, dtype=np.int64)
    clicks_arr = np.zeros(n_arms, dtype=np.int64)
    winners_arr = np.empty(max(n_events, 1), dtype=np.int64)
    cdef int64_t[::1] impressions = impressions_arr
    cdef int64_t[::1] clicks = clicks_arr
    cdef int64_t[::1] winners = winners_arr

    cdef Py_ssize_t i, k, best
    cdef double ga, gb, draw, best_draw

    with bit_generator.lock, nogil:
        for i in range(n_events):
            best = 0
            best_draw = -1.0
            for k in range(n_arms):
                ga = random_standard_gamma(state, alpha[k])
                gb = random_standard_gamma(state, beta[k])
                draw = ga / (ga + gb)
                if draw > best_draw:
                    best_draw = draw
                    best = k
            winners[i] = best
            impressions[best] += 1
        for i in range(n_events):
            if random_standard_uniform(state) < theta[winners[i]]:
                clicks[winners[i]] += 1

    return impressions_arr, clicks_arr
