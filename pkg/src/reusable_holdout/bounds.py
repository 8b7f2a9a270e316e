"""Closed-form privacy, max-information and concentration bounds.

All information quantities are in bits. Formulas stated with natural logs
are converted with an explicit ``LOG2_E`` factor.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from reusable_holdout.errors import InvalidParameterError

LOG2_E = math.log2(math.e)

#: Returned by :func:`maxinfo_exact` when no finite bound exists.
INFINITE_BITS = math.inf


class PrivacyParams(NamedTuple):
    epsilon: float
    delta: float = 0.0


class MaxInfoBound(NamedTuple):
    k_bits: float
    beta: float = 0.0


@dataclass(frozen=True)
class ConcentrationParams:
    """A function of ``n`` independent inputs with per-input sensitivity ``sensitivity``."""

    sensitivity: float
    n: int
    deviation: float

    def __post_init__(self):
        if not self.sensitivity > 0 or self.n < 1 or not self.deviation >= 0:
            raise InvalidParameterError(f"invalid concentration parameters {self}")


def dp_compose_basic(params: Sequence[PrivacyParams]) -> PrivacyParams:
    params = list(params)
    if not params:
        raise InvalidParameterError("nothing to compose")
    return PrivacyParams(math.fsum(p[0] for p in params), math.fsum(p[1] for p in params))


def dp_compose_advanced(eps, delta, m, delta_prime) -> PrivacyParams:
    """Privacy of ``m``-fold adaptive composition of (eps, delta)-private steps."""
    if eps < 0 or delta < 0 or m < 1:
        raise InvalidParameterError("need eps, delta >= 0 and m >= 1")
    if not 0.0 < delta_prime <= 1.0:
        raise InvalidParameterError("delta_prime must be in (0, 1]")
    eps_total = math.sqrt(2 * m * math.log(1 / delta_prime)) * eps + m * eps * math.expm1(eps)
    return PrivacyParams(eps_total, m * delta + delta_prime)


def maxinfo_from_dp_pure(eps, n) -> MaxInfoBound:
    if eps < 0 or n < 1:
        raise InvalidParameterError("need eps >= 0 and n >= 1")
    return MaxInfoBound(LOG2_E * eps * n, 0.0)


def maxinfo_from_dp_iid(eps, n, beta) -> MaxInfoBound:
    """Approximate max-information of an eps-private algorithm on i.i.d. data."""
    if eps < 0 or n < 1:
        raise InvalidParameterError("need eps >= 0 and n >= 1")
    if not 0.0 < beta < 1.0:
        raise InvalidParameterError(f"beta must be in (0, 1), got {beta}")
    nats = eps ** 2 * n / 2 + eps * math.sqrt(n * math.log(2 / beta) / 2)
    return MaxInfoBound(LOG2_E * nats, beta)


def maxinfo_from_dl(range_size, beta) -> MaxInfoBound:
    if range_size < 1 or not 0.0 < beta <= 1.0:
        raise InvalidParameterError("need range_size >= 1 and beta in (0, 1]")
    return MaxInfoBound(math.log2(range_size) - math.log2(beta), beta)


def maxinfo_from_rdl(rdl_bits, beta) -> MaxInfoBound:
    if rdl_bits < 0 or not 0.0 < beta <= 1.0:
        raise InvalidParameterError("need rdl_bits >= 0 and beta in (0, 1]")
    return MaxInfoBound(rdl_bits - math.log2(beta), beta)


def maxinfo_compose(bounds: Sequence[MaxInfoBound]) -> MaxInfoBound:
    bounds = list(bounds)
    if not bounds:
        raise InvalidParameterError("nothing to compose")
    return MaxInfoBound(math.fsum(b[0] for b in bounds), min(1.0, math.fsum(b[1] for b in bounds)))


def bad_event_bound(mi: MaxInfoBound, base_prob) -> float:
    """Probability of an event under adaptivity, given its probability under independence."""
    if not 0.0 <= base_prob <= 1.0:
        raise InvalidParameterError(f"base_prob must be in [0, 1], got {base_prob}")
    k, beta = mi
    if base_prob == 0.0:
        return min(1.0, beta)
    # 2**k overflows for k > 1023; the log form saturates cleanly
    log_term = k + math.log2(base_prob)
    return min(1.0, 2.0 ** min(log_term, 1.0) + beta)


def mcdiarmid_bound(cp: ConcentrationParams) -> float:
    return math.exp(-2 * cp.deviation ** 2 / (cp.n * cp.sensitivity ** 2))


def dp_generalization_bound(cp: ConcentrationParams):
    """Privacy level needed, and the resulting tail bound, for deviation ``cp.deviation``.

    Returns ``(epsilon, failure_probability)``.
    """
    c, n, tau = cp.sensitivity, cp.n, cp.deviation
    return tau / (c * n), math.exp(-3 * tau ** 2 / (4 * c ** 2 * n))


class DiscreteJoint:
    """An explicit joint distribution of two finite random variables."""

    def __init__(self, joint_prob, support_x=None, support_y=None):
        p = np.array(joint_prob, dtype=float)
        if p.ndim != 2:
            raise InvalidParameterError("joint_prob must be a matrix")
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("joint_prob must be non-negative and sum to 1")
        self.joint_prob = p
        self.support_x = list(support_x) if support_x is not None else list(range(p.shape[0]))
        self.support_y = list(support_y) if support_y is not None else list(range(p.shape[1]))

    @classmethod
    def from_channel(cls, input_probs, channel):
        """Joint of ``X ~ input_probs`` and ``Y`` drawn from row ``X`` of ``channel``."""
        px = np.asarray(input_probs, dtype=float)
        return cls(px[:, None] * np.asarray(channel, dtype=float))

    @property
    def marginal_x(self):
        return self.joint_prob.sum(axis=1)

    @property
    def marginal_y(self):
        return self.joint_prob.sum(axis=0)

    def product(self):
        return np.outer(self.marginal_x, self.marginal_y)

    def transpose(self):
        return DiscreteJoint(self.joint_prob.T, self.support_y, self.support_x)

    def post_process(self, mapping, n_outputs=None):
        """Joint of ``(X, mapping[Y])`` for a deterministic map on the Y indices."""
        mapping = np.asarray(mapping, dtype=int)
        n_outputs = n_outputs or int(mapping.max()) + 1
        q = np.zeros((self.joint_prob.shape[0], n_outputs))
        np.add.at(q.T, mapping, self.joint_prob.T)
        return DiscreteJoint(q / q.sum())


def excess_mass(p, q, k_bits):
    """sum over outcomes of max(p - 2**k q, 0)."""
    return float(np.maximum(p - 2.0 ** k_bits * q, 0.0).sum())


def approx_max_divergence(p, q, delta, tol=1e-9, upper=64.0):
    """delta-approximate max-divergence of ``p`` from ``q``, in bits, floored at 0.

    Uses D(p||q) <= k iff sum (p - 2^k q)_+ <= delta and bisects on k over
    [0, upper]. Returns :data:`INFINITE_BITS` when no k in range satisfies it.
    """
    p = np.ravel(np.asarray(p, dtype=float))
    q = np.ravel(np.asarray(q, dtype=float))
    if not 0.0 <= delta < 1.0:
        raise InvalidParameterError(f"delta must be in [0, 1), got {delta}")
    if delta == 0.0:
        support = p > 0
        if (q[support] <= 0).any():
            return INFINITE_BITS
        return max(0.0, float(np.log2(np.max(p[support] / q[support]))))
    if excess_mass(p, q, 0.0) <= delta:
        return 0.0
    if excess_mass(p, q, upper) > delta:
        return INFINITE_BITS
    lo, hi = 0.0, upper
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess_mass(p, q, mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


def maxinfo_exact(joint: DiscreteJoint, beta=0.0) -> float:
    """Exact beta-approximate max-information between the two coordinates of ``joint``."""
    return approx_max_divergence(joint.joint_prob, joint.product(), beta)
