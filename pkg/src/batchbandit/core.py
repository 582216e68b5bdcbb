"""Beta-Bernoulli bandit state and the two batched posterior-update rules.

Arms carry independent Beta(alpha, beta) posteriors over their click-through
rate, initialized at the uniform Beta(1, 1). Within a batch the posteriors are
frozen; responses are accumulated in ``BatchCounters`` and folded in at the
batch boundary by one of two rules:

* summation: alpha_k += S_k, beta_k += F_k (every observation counts once)
* normalization: each arm that received traffic contributes a pseudo-count
  mass of exactly M/K, split by its in-batch success rate; arms with no
  traffic are left untouched.

Updates never mutate their input state; they return a new ``BanditState``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, ValidationError


@dataclass(frozen=True)
class ArmPosterior:
    """Beta posterior over a single arm's success probability."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValidationError("posterior parameters must be finite")
        if self.alpha < 1.0 or self.beta < 1.0:
            raise ValidationError(
                f"posterior parameters must be >= 1, got Beta({self.alpha}, {self.beta})"
            )

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def posterior_mean(arm: ArmPosterior) -> float:
    """Expected success rate alpha / (alpha + beta) of the arm's posterior."""
    return arm.mean


class UpdateMethod(Enum):
    """Which batch-boundary update rule to apply."""

    SUMMATION = "summation"
    NORMALIZATION = "normalization"

    @classmethod
    def parse(cls, name: str) -> "UpdateMethod":
        key = name.strip().lower()
        aliases = {
            "sum": cls.SUMMATION,
            "summation": cls.SUMMATION,
            "norm": cls.NORMALIZATION,
            "normalization": cls.NORMALIZATION,
        }
        if key not in aliases:
            raise ConfigurationError(f"unknown update method {name!r} (expected sum or norm)")
        return aliases[key]


class BanditState:
    """Posterior parameters for K arms, stored as float64 arrays."""

    __slots__ = ("alpha", "beta")

    def __init__(self, alpha: np.ndarray, beta: np.ndarray):
        alpha = np.ascontiguousarray(alpha, dtype=np.float64)
        beta = np.ascontiguousarray(beta, dtype=np.float64)
        if alpha.ndim != 1 or alpha.shape != beta.shape:
            raise ValidationError("alpha and beta must be 1-d arrays of equal length")
        if alpha.shape[0] < 2:
            raise ValidationError("a bandit needs at least 2 arms")
        if not (np.isfinite(alpha).all() and np.isfinite(beta).all()):
            raise ValidationError("posterior parameters must be finite")
        if (alpha < 1.0).any() or (beta < 1.0).any():
            raise ValidationError("posterior parameters must be >= 1")
        self.alpha = alpha
        self.beta = beta

    @classmethod
    def from_priors(cls, priors: "list[tuple[float, float]] | tuple[tuple[float, float], ...]") -> "BanditState":
        priors = list(priors)
        return cls(
            np.array([p[0] for p in priors], dtype=np.float64),
            np.array([p[1] for p in priors], dtype=np.float64),
        )

    @property
    def arm_count(self) -> int:
        return self.alpha.shape[0]

    @property
    def arms(self) -> tuple[ArmPosterior, ...]:
        return tuple(ArmPosterior(float(a), float(b)) for a, b in zip(self.alpha, self.beta))

    def means(self) -> np.ndarray:
        return self.alpha / (self.alpha + self.beta)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BanditState):
            return NotImplemented
        return bool(np.array_equal(self.alpha, other.alpha) and np.array_equal(self.beta, other.beta))

    def __repr__(self) -> str:
        return f"BanditState(alpha={self.alpha!r}, beta={self.beta!r})"


def init_arms(arm_count: int) -> BanditState:
    """Fresh state with a uniform Beta(1, 1) prior on every arm."""
    if arm_count < 2:
        raise ConfigurationError(f"arm_count must be >= 2, got {arm_count}")
    return BanditState(np.ones(arm_count), np.ones(arm_count))


def sample_arm(state: BanditState, rng: np.random.Generator) -> int:
    """Thompson selection: draw from each arm's posterior, return the argmax.

    Each Beta draw is the ratio g_a / (g_a + g_b) of two Gamma variates, so
    one call consumes exactly ``2 * arm_count`` gamma draws from ``rng`` in
    arm order. Ties (measure zero) resolve to the lowest index.
    """
    shapes = np.empty((state.arm_count, 2))
    shapes[:, 0] = state.alpha
    shapes[:, 1] = state.beta
    g = rng.standard_gamma(shapes)
    draws = g[:, 0] / (g[:, 0] + g[:, 1])
    return int(np.argmax(draws))


class BatchCounters:
    """Per-arm success/failure tallies accumulated within one batch."""

    __slots__ = ("successes", "failures")

    def __init__(self, successes: np.ndarray, failures: np.ndarray):
        successes = np.ascontiguousarray(successes, dtype=np.int64)
        failures = np.ascontiguousarray(failures, dtype=np.int64)
        if successes.ndim != 1 or successes.shape != failures.shape:
            raise ValidationError("successes and failures must be 1-d arrays of equal length")
        if (successes < 0).any() or (failures < 0).any():
            raise ValidationError("counters must be non-negative")
        self.successes = successes
        self.failures = failures

    @classmethod
    def zeros(cls, arm_count: int) -> "BatchCounters":
        if arm_count < 2:
            raise ConfigurationError(f"arm_count must be >= 2, got {arm_count}")
        return cls(np.zeros(arm_count, dtype=np.int64), np.zeros(arm_count, dtype=np.int64))

    @property
    def arm_count(self) -> int:
        return self.successes.shape[0]

    @property
    def total_events(self) -> int:
        return int(self.successes.sum() + self.failures.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BatchCounters):
            return NotImplemented
        return bool(
            np.array_equal(self.successes, other.successes)
            and np.array_equal(self.failures, other.failures)
        )

    def __repr__(self) -> str:
        return f"BatchCounters(successes={self.successes!r}, failures={self.failures!r})"


def record_response(counters: BatchCounters, arm: int, reward: int) -> BatchCounters:
    """Tally one Bernoulli response for ``arm`` (mutates and returns ``counters``)."""
    if not 0 <= arm < counters.arm_count:
        raise IndexError(f"arm {arm} out of range for {counters.arm_count} arms")
    if reward not in (0, 1):
        raise ValidationError(f"reward must be 0 or 1, got {reward!r}")
    if reward:
        counters.successes[arm] += 1
    else:
        counters.failures[arm] += 1
    return counters


def _check_dims(state: BanditState, counters: BatchCounters) -> None:
    if state.arm_count != counters.arm_count:
        raise ValidationError(
            f"state has {state.arm_count} arms but counters have {counters.arm_count}"
        )


def summation_update(state: BanditState, counters: BatchCounters) -> BanditState:
    """Add raw batch counts to the posteriors: alpha += S_k, beta += F_k."""
    _check_dims(state, counters)
    return BanditState(state.alpha + counters.successes, state.beta + counters.failures)


def normalization_update(state: BanditState, counters: BatchCounters, batch_size: int) -> BanditState:
    """Give each arm that received traffic a pseudo-count mass of batch_size / K.

    The mass splits by the arm's in-batch success rate S_k / (S_k + F_k):
    alpha_k += (M / K) * rate_k and beta_k += (M / K) * (1 - rate_k). Arms with
    no traffic in the batch keep their posterior unchanged.
    """
    _check_dims(state, counters)
    if batch_size != counters.total_events:
        raise ValidationError(
            f"batch_size {batch_size} does not match recorded events {counters.total_events}"
        )
    events = counters.successes + counters.failures
    served = events > 0
    rate = np.zeros(state.arm_count)
    np.divide(counters.successes, events, out=rate, where=served)
    mass = batch_size / state.arm_count
    alpha = state.alpha + np.where(served, mass * rate, 0.0)
    beta = state.beta + np.where(served, mass * (1.0 - rate), 0.0)
    return BanditState(alpha, beta)
