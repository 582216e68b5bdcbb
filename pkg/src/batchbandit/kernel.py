"""Hot-loop batch simulation kernel with two interchangeable backends.

Both backends implement the same stream contract: for a batch of M events
over K arms, the generator is consumed as M*K (gamma(alpha_k), gamma(beta_k))
pairs in event-major, arm-minor order (one Beta draw per arm per event via the
gamma ratio), followed by M uniform doubles, one reward draw per event in
event order. ``sample_arm`` plus ``simulate_response`` consume the stream the
same way for a single event, so a batched run with batch size 1 is exactly the
classical per-event algorithm, bit for bit, and so are the two backends
relative to each other.

The compiled backend (``batchbandit._native``, Cython) drives the numpy bit
generator directly; the fallback is a vectorized numpy implementation. numpy
fills vectorized standard_gamma/random output in C order from the same
bitstream as repeated scalar calls, which is what makes the two equivalent.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def simulate_batch_numpy(
    rng: np.random.Generator,
    alpha: np.ndarray,
    beta: np.ndarray,
    theta: np.ndarray,
    n_events: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized batch simulation; returns per-arm (impressions, clicks)."""
    n_arms = alpha.shape[0]
    shapes = np.empty((n_events, n_arms, 2))
    shapes[..., 0] = alpha
    shapes[..., 1] = beta
    g = rng.standard_gamma(shapes)
    draws = g[..., 0] / (g[..., 0] + g[..., 1])
    winners = draws.argmax(axis=1)
    clicked = rng.random(n_events) < theta[winners]
    impressions = np.bincount(winners, minlength=n_arms)
    clicks = np.bincount(winners[clicked], minlength=n_arms)
    return impressions.astype(np.int64), clicks.astype(np.int64)


def simulate_batch_native(
    rng: np.random.Generator,
    alpha: np.ndarray,
    beta: np.ndarray,
    theta: np.ndarray,
    n_events: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Compiled batch simulation; same stream contract as the numpy path."""
    return _native.simulate_batch(rng.bit_generator, alpha, beta, theta, n_events)


try:
    from . import _native
except ImportError:
    _native = None

if _native is not None:
    KERNEL_BACKEND = "native"
    simulate_batch = simulate_batch_native
else:
    KERNEL_BACKEND = "numpy"
    simulate_batch = simulate_batch_numpy


def has_native() -> bool:
    return _native is not None


def get_backend(name: str):
    """Look up a kernel implementation by name (for tests and benchmarks)."""
    if name == "numpy":
        return simulate_batch_numpy
    if name == "native":
        if _native is None:
            raise ValidationError("native kernel is not available in this build")
        return simulate_batch_native
    raise ValidationError(f"unknown kernel backend {name!r}")
