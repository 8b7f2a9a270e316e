"""Noise-free Median Mechanism over a small explicit domain.

Candidate datasets of size ``t`` are stored as count vectors over the
domain (multisets), each weighted by its multinomial multiplicity, so that
weighted medians equal medians over the full tuple enumeration.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from reusable_holdout.errors import InvalidParameterError, ReconstructionError, ResourceError

DEFAULT_CAP = 10 ** 7

# guards against ceil/floor of values that are integral up to rounding
_EPS = 1e-9


def candidate_size(m, tau):
    alpha = tau / 3.0
    return max(1, math.ceil(math.log2(m) / alpha ** 2 - _EPS))


def multiset_count(domain_size, t):
    return math.comb(domain_size + t - 1, t)


def hard_query_bound(domain_size, m, tau):
    """Maximum number of answers that can differ from the public median."""
    alpha = tau / 3.0
    return math.log2(domain_size) * math.log2(m) / alpha ** 2


def floor_to_grid(a, alpha):
    """Largest multiple of ``alpha`` not exceeding ``a``."""
    return math.floor(a / alpha + _EPS) * alpha


def _compositions(total, parts):
    """All count vectors of length ``parts`` summing to ``total``, lexicographic."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    blocks = []
    for first in range(total, -1, -1):
        rest = _compositions(total - first, parts - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.concatenate(blocks)


def _log_multinomial(counts):
    t = counts.sum(axis=1)[0]
    lg = np.vectorize(math.lgamma, otypes=[float])
    return math.lgamma(t + 1) - lg(counts + 1).sum(axis=1)


def weighted_lower_median(values, weights):
    """Smallest value whose cumulative weight reaches half the total."""
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    idx = int(np.searchsorted(cum, 0.5 * cum[-1] * (1 - 1e-12), side="left"))
    return float(values[order[min(idx, len(order) - 1)]])


@dataclass
class Step:
    query: object
    public: float
    private: Optional[float]
    answer: float
    hard: bool


@dataclass
class MedianMechanism:
    """Session state; build with :func:`mm_new`."""

    domain: Sequence
    m: int
    tau: float
    alpha: float
    t: int
    counts: np.ndarray
    log_weights: np.ndarray
    hard_records: List[Tuple[int, float]] = field(default_factory=list)
    queries_seen: int = 0
    steps: List[Step] = field(default_factory=list)

    @property
    def weights(self):
        # relative weights; exact ratios are all that medians and halving use
        return np.exp(self.log_weights - self.log_weights.max())

    @property
    def total_log_weight(self):
        lw = self.log_weights
        return float(lw.max() + np.log(np.exp(lw - lw.max()).sum()))

    def _query_vector(self, query):
        return np.array([query(x) for x in self.domain], dtype=float)

    def candidate_means(self, query):
        return self.counts @ self._query_vector(query) / self.t

    def public_answer(self, query):
        return weighted_lower_median(self.candidate_means(query), self.weights)

    def _prune(self, query, answer):
        keep = np.abs(answer - self.candidate_means(query)) <= 2 * self.alpha + 1e-12
        if not keep.any():
            raise AssertionError("consistent set emptied; this cannot happen for a real dataset")
        self.counts = self.counts[keep]
        self.log_weights = self.log_weights[keep]

    def _step(self, query, private, recorded=None):
        if self.queries_seen >= self.m:
            raise InvalidParameterError(f"query budget m={self.m} exhausted")
        public = self.public_answer(query)
        if recorded is not None:
            hard, answer = True, recorded
        elif private is not None:
            hard = abs(public - private) > 2 * self.alpha
            answer = floor_to_grid(private, self.alpha) if hard else public
        else:
            hard, answer = False, public
        if hard:
            self.hard_records.append((self.queries_seen, answer))
            self._prune(query, answer)
        self.steps.append(Step(query, public, private, answer, hard))
        self.queries_seen += 1
        return answer

    def answer(self, query, dataset):
        """Answer ``query`` about ``dataset`` (a sequence of domain elements)."""
        if len(dataset) == 0:
            raise InvalidParameterError("empty dataset")
        private = float(np.mean([query(x) for x in dataset]))
        return self._step(query, private)

    def transcript(self):
        return [(s.query, s.answer) for s in self.steps]


def mm_new(domain, m, tau, cap=DEFAULT_CAP):
    domain = list(domain)
    if len(domain) < 2:
        raise InvalidParameterError("domain needs at least two elements")
    if m < 2:
        raise InvalidParameterError("m must be at least 2")
    if not tau > 0:
        raise InvalidParameterError("tau must be positive")
    t = candidate_size(m, tau)
    count = multiset_count(len(domain), t)
    if count > cap:
        raise ResourceError(
            f"median mechanism needs {count:.3g} candidate multisets of size t={t} "
            f"over {len(domain)} elements; cap is {cap}")
    counts = _compositions(t, len(domain))
    return MedianMechanism(domain=domain, m=int(m), tau=float(tau), alpha=tau / 3.0, t=t,
                           counts=counts, log_weights=_log_multinomial(counts))


def mm_answer(state, query, dataset):
    return state.answer(query, dataset)


def mm_sample_bound(domain_size, m, tau, beta):
    """Dataset size sufficient for all ``m`` answers to be ``tau``-accurate w.p. 1-beta."""
    if domain_size < 2 or m < 2 or not 0 < tau or not 0 < beta < 1:
        raise InvalidParameterError("invalid median mechanism parameters")
    first = 81 * math.log2(domain_size) * math.log2(m) * math.log(3 * m / tau) / (2 * tau ** 4)
    second = 9 * math.log(2 * m / beta) / (2 * tau ** 2)
    return math.ceil(first + second)


Analyst = Callable[[list], Optional[Callable]]


def run_session(analyst, domain, m, tau, dataset, cap=DEFAULT_CAP):
    """Let a deterministic ``analyst`` interact with a fresh mechanism on ``dataset``.

    ``analyst(prefix)`` receives the list of ``(query, answer)`` pairs so far
    and returns the next query, or ``None`` to stop.
    """
    state = mm_new(domain, m, tau, cap)
    while state.queries_seen < m:
        query = analyst(state.transcript())
        if query is None:
            break
        state.answer(query, dataset)
    return state


def mm_reconstruct_transcript(hard_records, analyst, domain, m, tau, cap=DEFAULT_CAP):
    """Rebuild the full (query, answer) transcript from the hard-query record alone."""
    records = dict(hard_records)
    if len(records) != len(hard_records):
        raise ReconstructionError("duplicate indices in hard-query record")
    state = mm_new(domain, m, tau, cap)
    while state.queries_seen < m:
        query = analyst(state.transcript())
        if query is None:
            break
        try:
            state._step(query, None, records.get(state.queries_seen))
        except AssertionError as exc:
            raise ReconstructionError(str(exc)) from None
    unused = [i for i in records if i >= state.queries_seen]
    if unused:
        raise ReconstructionError(f"hard-query indices {unused} lie beyond the replayed session")
    return state.transcript()
