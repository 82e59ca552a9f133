from fractions import Fraction

import pytest

from treechain.errors import DivergenceError, SingularMatrixError
from treechain.series import PowerSeries, series_det


def test_arithmetic():
    x = PowerSeries.variable(4)
    one = PowerSeries.constant(1, 4)

    assert (one + x)[1] == 1
    assert ((one + x) * (one - x)).coefficients == (1, 0, -1, 0, 0)
    assert (2 - x)[0] == 2
    assert (x * Fraction(1, 2))[1] == Fraction(1, 2)


def test_geometric_inverse():
    x = PowerSeries.variable(6)

    geometric = 1 / (1 - x)

    assert geometric.coefficients == tuple(Fraction(1) for _ in range(7))


def test_inverse_needs_constant_term():
    with pytest.raises(DivergenceError):
        PowerSeries.variable(3).inverse()


def test_truncation_to_common_degree():
    assert (PowerSeries.variable(3) + PowerSeries.variable(5)).degree == 3


def test_evaluate():
    series = PowerSeries([1, 2, 3], 2)

    assert series.evaluate(Fraction(1, 2)) == Fraction(11, 4)
    assert series.evaluate(0.5) == pytest.approx(2.75)


def test_equality():
    assert PowerSeries([1], 3) == 1
    assert PowerSeries([1, 1], 3) == PowerSeries([1, 1, 0, 0], 3)


def test_series_det():
    x = PowerSeries.variable(4)
    one = PowerSeries.constant(1, 4)
    zero = PowerSeries.constant(0, 4)

    result = series_det([[one, x], [x, one]])

    assert result.coefficients == (1, 0, -1, 0, 0)
    assert series_det([[zero, one], [one, zero]]) == -1


def test_series_det_singular():
    zero = PowerSeries.constant(0, 2)
    x = PowerSeries.variable(2)

    with pytest.raises(SingularMatrixError):
        series_det([[zero, x], [x, zero]])

    with pytest.raises(SingularMatrixError):
        series_det([])
