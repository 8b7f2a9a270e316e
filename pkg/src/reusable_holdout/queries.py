"""Statistical queries: functions from a data element to [0, 1]."""

from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np

from reusable_holdout.errors import InvalidParameterError


@dataclass(frozen=True)
class StatisticalQuery:
    """A [0, 1]-valued function of one data element.

    With ``batched=True`` the function receives the whole dataset and must
    return one value per element; this is how queries over column-stored
    :class:`~reusable_holdout.experiments.LabeledDataset` objects avoid a
    Python loop per row. Values are clipped to [0, 1] either way.
    """

    func: Callable[[Any], Any]
    label: str = "query"
    batched: bool = False

    def __call__(self, element):
        return float(np.clip(self.func(element), 0.0, 1.0))

    def evaluate(self, dataset):
        if self.batched:
            values = np.asarray(self.func(dataset), dtype=float)
        else:
            values = np.array([self.func(x) for x in dataset], dtype=float)
        return np.clip(values, 0.0, 1.0)

    @classmethod
    def constant(cls, value):
        value = float(value)
        return cls(lambda x: value, label=f"constant({value})")

    @classmethod
    def from_table(cls, table: Mapping, label="table"):
        table = dict(table)
        return cls(lambda x: table[x], label=label)

    @classmethod
    def accuracy(cls, classify, label="accuracy"):
        """Indicator that ``classify(x) == y`` for labelled elements ``(x, y)``."""
        return cls(lambda xy: float(classify(xy[0]) == xy[1]), label=label)


def empirical_mean(query, dataset):
    """Mean of ``query`` over the elements of ``dataset``."""
    if len(dataset) == 0:
        raise InvalidParameterError("empirical mean of an empty dataset")
    return float(np.mean(query.evaluate(dataset)))
