"""Holdout reuse mechanisms: Thresholdout and SparseValidate."""

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from reusable_holdout.errors import InvalidParameterError
from reusable_holdout.noise import NoiseKind, NoiseSource
from reusable_holdout.queries import empirical_mean


class Signal(enum.Enum):
    """Non-numeric answers. Both are ordinary return values, not errors."""

    BOTTOM = "bottom"
    EXHAUSTED = "exhausted"

    def __repr__(self):
        return self.name


BOTTOM = Signal.BOTTOM
EXHAUSTED = Signal.EXHAUSTED


@dataclass
class ThresholdoutConfig:
    threshold: float
    sigma: float
    budget: int
    noise: NoiseSource = field(default_factory=lambda: NoiseSource(NoiseKind.LAPLACE, 0))
    one_sided: bool = False

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise InvalidParameterError(f"threshold must be in [0, 1], got {self.threshold}")
        if not self.sigma >= 0.0:
            raise InvalidParameterError(f"sigma must be >= 0, got {self.sigma}")
        if int(self.budget) != self.budget or self.budget < 0:
            raise InvalidParameterError(f"budget must be a non-negative integer, got {self.budget}")
        self.budget = int(self.budget)


class Thresholdout:
    """Reusable holdout answering statistical queries.

    A query is answered with its training-set mean unless that mean differs
    from the holdout mean by more than a noisy threshold; in that case a
    noisy holdout mean is released and one unit of the overfitting budget
    is spent. Once the budget is gone every answer is :data:`BOTTOM`.

    Noise is drawn in a fixed order: the initial threshold offset at
    construction, then for each query the comparison noise and, only when
    the comparison fires, the answer noise followed by a fresh threshold
    offset. With ``NoiseKind.NONE`` the mechanism is fully deterministic.
    """

    def __init__(self, config):
        self.config = config
        self.remaining_budget = config.budget
        self.answers_given = 0
        self.last_above = False
        self.noisy_threshold = config.threshold + config.noise.draw(2 * config.sigma)

    def _exceeds(self, train_mean, holdout_mean, eta):
        gap = holdout_mean - train_mean
        if not self.config.one_sided:
            gap = abs(gap)
        return gap > self.noisy_threshold + eta

    def answer_means(self, train_mean, holdout_mean):
        """Answer a query given its training and holdout means."""
        cfg = self.config
        self.last_above = False
        if self.remaining_budget < 1:
            return BOTTOM
        self.answers_given += 1
        eta = cfg.noise.draw(4 * cfg.sigma)
        if self._exceeds(train_mean, holdout_mean, eta):
            xi = cfg.noise.draw(cfg.sigma)
            gamma = cfg.noise.draw(2 * cfg.sigma)
            self.remaining_budget -= 1
            self.noisy_threshold = cfg.threshold + gamma
            self.last_above = True
            return holdout_mean + xi
        return train_mean

    def answer(self, query, train, holdout):
        if self.remaining_budget < 1:
            self.last_above = False
            return BOTTOM
        return self.answer_means(empirical_mean(query, train), empirical_mean(query, holdout))


def thresholdout_answer(state, query, train, holdout):
    return state.answer(query, train, holdout)


def thresholdout_privacy_epsilon(budget, sigma, n):
    """Pure privacy level 2B/(sigma n) of a Thresholdout session on n holdout points."""
    return 2.0 * budget / (sigma * n)


def n0_bound(budget, sigma, tau, beta):
    """Holdout size sufficient via the pure-privacy route (linear in budget)."""
    return max(2.0 * budget / (sigma * tau), math.log(6.0 / beta) / tau ** 2)


def n1_bound(budget, sigma, tau, beta):
    """Holdout size sufficient via the approximate-privacy route (grows as sqrt(budget))."""
    return 80.0 * math.sqrt(budget * math.log(1.0 / (tau * beta))) / (tau * sigma)


class ThresholdoutParams(NamedTuple):
    threshold: float
    sigma: float
    n_min: int


def thresholdout_params(tau, beta, m, budget):
    """Threshold, noise rate and holdout size for accuracy ``tau`` on ``m`` queries.

    The guarantee holds with probability ``1 - beta`` for every query asked
    before ``budget`` overfitting queries have occurred. Calibrated for
    Laplace noise.
    """
    if not 0.0 < tau < 1.0:
        raise InvalidParameterError(f"tau must be in (0, 1), got {tau}")
    if not 0.0 < beta < 1.0:
        raise InvalidParameterError(f"beta must be in (0, 1), got {beta}")
    if not (budget >= 1 and m >= budget):
        raise InvalidParameterError(f"need m >= budget >= 1, got m={m}, budget={budget}")
    threshold = 3.0 * tau / 4.0
    sigma = tau / (96.0 * math.log(4.0 * m / beta))
    tau_q, beta_q = tau / 8.0, beta / (2.0 * m)
    n_min = min(n0_bound(budget, sigma, tau_q, beta_q), n1_bound(budget, sigma, tau_q, beta_q))
    return ThresholdoutParams(threshold, sigma, math.ceil(n_min))


class SparseValidate:
    """Answers arbitrary 0/1 predicates of the holdout set under two budgets.

    At most ``m`` predicates are answered in total and at most ``budget``
    of the answers may be 1. The answer that uses up either budget is still
    returned; everything after it is :data:`EXHAUSTED`.
    """

    def __init__(self, m, budget):
        if m < 0 or budget < 0:
            raise InvalidParameterError("budgets must be non-negative")
        self.m = int(m)
        self.budget = int(budget)
        self.queries_asked = 0
        self.ones_returned = 0
        self.transcript = []

    @property
    def exhausted(self):
        return self.queries_asked >= self.m or self.ones_returned >= self.budget

    def answer(self, predicate, holdout):
        if self.exhausted:
            return EXHAUSTED
        bit = int(bool(predicate(holdout)))
        self.transcript.append(bit)
        self.queries_asked += 1
        self.ones_returned += bit
        return bit

    def transcript_string(self):
        return "".join(str(b) for b in self.transcript)


def sparse_validate_answer(state, predicate, holdout):
    return state.answer(predicate, holdout)


def sparse_validate_ell(i, budget):
    """Number of possible answer histories before query ``i``: sum_{j<=min(i-1,B)} C(i, j)."""
    if i < 1 or budget < 0:
        raise InvalidParameterError("need i >= 1 and budget >= 0")
    return sum(math.comb(i, j) for j in range(min(i - 1, budget) + 1))


def sparse_validate_failure_bound(i, budget, beta_i):
    """Probability bound ``ell_i * beta_i`` (capped at 1) that query ``i`` returns 1."""
    if not 0.0 <= beta_i <= 1.0:
        raise InvalidParameterError(f"beta_i must be in [0, 1], got {beta_i}")
    bound = sparse_validate_ell(i, budget) * Fraction(beta_i)
    return float(min(bound, Fraction(1)))
