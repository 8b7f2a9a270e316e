"""Seeded noise sources for the holdout mechanisms."""

import enum

import numpy as np

from reusable_holdout.errors import InvalidParameterError
from reusable_holdout.seeding import make_rng

_TWO_POW_53 = 2 ** 53


class NoiseKind(enum.Enum):
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"
    NONE = "none"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameterError(f"unknown noise kind {value!r}") from None


def laplace_from_uniform(u, scale):
    """Inverse CDF of the zero-mean Laplace distribution with scale ``scale``.

    ``u`` must lie strictly inside (0, 1).
    """
    v = np.asarray(u, dtype=float) - 0.5
    return -scale * np.sign(v) * np.log1p(-2.0 * np.abs(v)) + 0.0


class NoiseSource:
    """A reproducible stream of Laplace, Gaussian or zero noise.

    Each Laplace draw consumes exactly one 53-bit uniform from the stream,
    so transcripts are bit-reproducible for a fixed seed. ``scale`` is the
    Laplace parameter ``b`` (density ``exp(-|x|/b) / 2b``) or the Gaussian
    standard deviation.
    """

    def __init__(self, kind=NoiseKind.LAPLACE, seed=0):
        self.kind = NoiseKind.parse(kind)
        self.seed = int(seed)
        self._rng = make_rng(self.seed, "noise")

    def __repr__(self):
        return f"NoiseSource(kind={self.kind.value!r}, seed={self.seed})"

    def _open_uniform(self, size):
        k = self._rng.integers(0, _TWO_POW_53, size=size, dtype=np.int64)
        return (k + 0.5) / _TWO_POW_53

    def draw(self, scale, size=None):
        """Draw noise at ``scale``; returns a float, or an array if ``size`` is given."""
        if not scale >= 0:
            raise InvalidParameterError(f"noise scale must be >= 0, got {scale}")
        if self.kind is NoiseKind.NONE:
            return 0.0 if size is None else np.zeros(size)
        if self.kind is NoiseKind.LAPLACE:
            x = laplace_from_uniform(self._open_uniform(size), scale)
        else:
            x = scale * self._rng.standard_normal(size) + 0.0
        return float(x) if size is None else x


def noise_draw(source, scale):
    return source.draw(scale)
