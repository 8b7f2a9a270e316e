import math

import numpy as np
import pytest

from reusable_holdout import InvalidParameterError, NoiseKind, NoiseSource
from reusable_holdout.noise import laplace_from_uniform


def test_none_kind_is_zero():
    src = NoiseSource(NoiseKind.NONE, 3)
    assert src.draw(5.0) == 0.0
    assert np.all(src.draw(2.0, size=10) == 0.0)


def test_negative_scale_rejected():
    with pytest.raises(InvalidParameterError):
        NoiseSource(NoiseKind.LAPLACE, 0).draw(-1.0)


def test_laplace_median_near_zero():
    x = NoiseSource(NoiseKind.LAPLACE, 11).draw(1.0, size=100_000)
    assert -0.02 <= np.median(x) <= 0.02


def test_laplace_tail_matches_exponential():
    x = NoiseSource(NoiseKind.LAPLACE, 12).draw(1.0, size=1_000_000)
    tail = np.mean(np.abs(x) >= 3.0)
    assert math.exp(-3) * 0.8 <= tail <= math.exp(-3) * 1.2


def test_laplace_scale_is_b():
    # Var = 2 b^2
    x = NoiseSource(NoiseKind.LAPLACE, 13).draw(2.5, size=400_000)
    assert np.var(x) == pytest.approx(2 * 2.5 ** 2, rel=0.02)


def test_gaussian_std_is_scale():
    x = NoiseSource(NoiseKind.GAUSSIAN, 14).draw(0.3, size=400_000)
    assert np.std(x) == pytest.approx(0.3, rel=0.01)
    assert abs(np.mean(x)) < 0.003


def test_inverse_cdf_against_closed_form():
    u = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    expected = np.array([math.log(0.2), math.log(0.5), 0.0, -math.log(0.5), -math.log(0.2)])
    assert np.allclose(laplace_from_uniform(u, 1.0), expected)


@pytest.mark.parametrize("kind", list(NoiseKind))
def test_seed_reproducible(kind):
    a = [NoiseSource(kind, 99).draw(1.0) for _ in range(1)] + list(NoiseSource(kind, 99).draw(1.0, size=5))
    b = [NoiseSource(kind, 99).draw(1.0) for _ in range(1)] + list(NoiseSource(kind, 99).draw(1.0, size=5))
    assert a == b


def test_scalar_and_batch_streams_agree():
    s1, s2 = NoiseSource("laplace", 5), NoiseSource("laplace", 5)
    scalars = [s1.draw(1.0) for _ in range(6)]
    assert np.array_equal(scalars, s2.draw(1.0, size=6))


def test_draws_are_finite():
    x = NoiseSource("laplace", 1).draw(1.0, size=10 ** 6)
    assert np.isfinite(x).all()
