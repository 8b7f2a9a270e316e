"""Rejection sampler that trades a max-divergence bound for short description length.

Given a target law ``Y`` and a reference law ``Z`` with
``P_Y(y) <= 2**k P_Z(y)``, the sampler draws ``t = ceil(2**k ln(1/beta'))``
candidates from ``Z`` and accepts candidate ``y`` with probability
``P_Y(y) / (2**k P_Z(y))``. Its output is one of ``t`` values fixed by the
random draws, and it is within ``beta'`` of ``Y`` in total variation.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from reusable_holdout.errors import InvalidParameterError
from reusable_holdout.seeding import make_rng

_RATIO_SLACK = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    support: Sequence
    probs: np.ndarray

    def __init__(self, support, probs):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or len(probs) != len(support):
            raise InvalidParameterError("support and probs must have equal length")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("probs must be non-negative and sum to 1")
        object.__setattr__(self, "support", tuple(support))
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_probs(cls, probs):
        return cls(range(len(probs)), probs)

    def __len__(self):
        return len(self.support)

    def aligned(self, other):
        """This distribution's probabilities listed over ``other.support``."""
        index = {s: i for i, s in enumerate(self.support)}
        missing = [s for s, p in zip(self.support, self.probs) if p > 0 and s not in other.support]
        if missing:
            raise InvalidParameterError(f"outcomes {missing} are outside the reference support")
        return np.array([self.probs[index[s]] if s in index else 0.0 for s in other.support])


def trial_count(k_bits, beta_prime):
    if not 0.0 < beta_prime < 1.0:
        raise InvalidParameterError(f"beta_prime must be in (0, 1), got {beta_prime}")
    if k_bits < 0:
        raise InvalidParameterError(f"k_bits must be >= 0, got {k_bits}")
    return max(1, math.ceil(2.0 ** k_bits * math.log(1.0 / beta_prime)))


def acceptance_probs(target, reference, k_bits):
    """Per-outcome acceptance probabilities over ``reference.support``."""
    p_y = target.aligned(reference)
    p_z = reference.probs
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p_z > 0, p_y / (2.0 ** k_bits * p_z), 0.0)
    bad = np.flatnonzero(ratio > 1.0 + _RATIO_SLACK)
    if bad.size:
        y = reference.support[bad[0]]
        raise InvalidParameterError(
            f"acceptance probability {ratio[bad[0]]:.6g} > 1 at outcome {y!r}: "
            f"max-divergence of target from reference exceeds {k_bits} bits")
    return np.minimum(ratio, 1.0)


def rejection_sample(target, reference, k_bits, beta_prime, seed):
    """Draw one outcome of the sampler. Falls back to the first candidate."""
    accept = acceptance_probs(target, reference, k_bits)
    t = trial_count(k_bits, beta_prime)
    rng = make_rng(seed, "rejection")
    first = None
    for _ in range(t):
        i = int(rng.choice(len(reference), p=reference.probs))
        if first is None:
            first = i
        if rng.random() < accept[i]:
            return reference.support[i]
    return reference.support[first]


def rejection_sample_many(target, reference, k_bits, beta_prime, n_draws, seed, chunk=100_000):
    """Outcome indices (into ``reference.support``) of ``n_draws`` independent runs."""
    accept = acceptance_probs(target, reference, k_bits)
    t = trial_count(k_bits, beta_prime)
    rng = make_rng(seed, "rejection-batch")
    cdf = np.cumsum(reference.probs)
    cdf[-1] = 1.0
    out = np.empty(n_draws, dtype=np.int64)
    rows = max(1, chunk // t)
    for start in range(0, n_draws, rows):
        size = min(rows, n_draws - start)
        cand = np.searchsorted(cdf, rng.random((size, t)), side="right")
        accepted = rng.random((size, t)) < accept[cand]
        hit = accepted.any(axis=1)
        first_hit = accepted.argmax(axis=1)
        out[start:start + size] = np.where(hit, cand[np.arange(size), first_hit], cand[:, 0])
    return out


def rejection_output_distribution(target, reference, k_bits, beta_prime):
    """Exact output law of :func:`rejection_sample` over ``reference.support``."""
    accept = acceptance_probs(target, reference, k_bits)
    t = trial_count(k_bits, beta_prime)
    p_z = reference.probs
    per_trial = p_z * accept
    a = float(per_trial.sum())
    if a > 0:
        # sum_{i=1..t} (1-a)^(i-1) = (1 - (1-a)^t) / a
        accepted_mass = per_trial * ((1.0 - (1.0 - a) ** t) / a)
    else:
        accepted_mass = np.zeros_like(p_z)
    # on fallback the first candidate was itself rejected, so it follows P_Z (1 - p)
    fallback_mass = (1.0 - a) ** (t - 1) * p_z * (1.0 - accept)
    return DiscreteDistribution(reference.support, accepted_mass + fallback_mass)


def fallback_probability(target, reference, k_bits, beta_prime):
    """Probability that all ``t`` candidates are rejected."""
    accept = acceptance_probs(target, reference, k_bits)
    return (1.0 - float((reference.probs * accept).sum())) ** trial_count(k_bits, beta_prime)


def tv_distance(p, q):
    """Total variation distance between two distributions on a shared universe."""
    universe = list(dict.fromkeys(list(p.support) + list(q.support)))
    pp = dict(zip(p.support, p.probs))
    qq = dict(zip(q.support, q.probs))
    return 0.5 * math.fsum(abs(pp.get(s, 0.0) - qq.get(s, 0.0)) for s in universe)


def rdl_of_transcript(k_bits, beta_prime):
    """Randomized description length k + log2 ln(1/beta') of the sampler's output."""
    if not 0.0 < beta_prime < 1.0:
        raise InvalidParameterError(f"beta_prime must be in (0, 1), got {beta_prime}")
    return k_bits + math.log2(math.log(1.0 / beta_prime))
