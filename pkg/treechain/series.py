"""Truncated formal power series in one variable"""

from __future__ import annotations

from collections.abc import Sequence
from fractions import Fraction

from .arith import Number
from .errors import DivergenceError, SingularMatrixError


class PowerSeries:
    """Coefficients c_0..c_degree of Σ c_n x^n, arithmetic modulo x^(degree+1)"""

    __slots__ = ("coefficients", "degree")

    def __init__(self, coefficients: Sequence[Number | int], degree: int):
        padded = list(coefficients[: degree + 1])
        padded.extend([Fraction(0)] * (degree + 1 - len(padded)))

        self.coefficients: tuple[Number, ...] = tuple(
            Fraction(value) if isinstance(value, int) else value for value in padded
        )
        self.degree = degree

    @classmethod
    def constant(cls, value: Number | int, degree: int) -> PowerSeries:
        return cls([value], degree)

    @classmethod
    def variable(cls, degree: int) -> PowerSeries:
        """The formal variable x"""
        return cls([0, 1], degree)

    def _lift(self, other: object) -> PowerSeries:
        if isinstance(other, PowerSeries):
            if other.degree != self.degree:
                degree = min(self.degree, other.degree)
                return PowerSeries(other.coefficients, degree)
            return other

        return PowerSeries.constant(other, self.degree)

    def __add__(self, other: object) -> PowerSeries:
        other = self._lift(other)
        degree = min(self.degree, other.degree)

        return PowerSeries(
            [a + b for a, b in zip(self.coefficients, other.coefficients)], degree
        )

    __radd__ = __add__

    def __neg__(self) -> PowerSeries:
        return PowerSeries([-a for a in self.coefficients], self.degree)

    def __sub__(self, other: object) -> PowerSeries:
        return self + (-self._lift(other))

    def __rsub__(self, other: object) -> PowerSeries:
        return self._lift(other) - self

    def __mul__(self, other: object) -> PowerSeries:
        if not isinstance(other, PowerSeries):
            return PowerSeries([a * other for a in self.coefficients], self.degree)

        degree = min(self.degree, other.degree)
        left = self.coefficients
        right = other.coefficients
        product: list[Number] = []

        for n in range(degree + 1):
            product.append(sum((left[k] * right[n - k] for k in range(n + 1)), Fraction(0)))

        return PowerSeries(product, degree)

    __rmul__ = __mul__

    def inverse(self) -> PowerSeries:
        """1/self, defined when the constant term is non-zero"""
        c0 = self.coefficients[0]

        if c0 == 0:
            raise DivergenceError("Series with zero constant term is not invertible", 0)

        result: list[Number] = [1 / Fraction(c0) if isinstance(c0, Fraction) else 1 / c0]

        for n in range(1, self.degree + 1):
            total = sum(
                (self.coefficients[k] * result[n - k] for k in range(1, n + 1)),
                Fraction(0),
            )
            result.append(-total * result[0])

        return PowerSeries(result, self.degree)

    def __truediv__(self, other: object) -> PowerSeries:
        if isinstance(other, PowerSeries):
            return self * other.inverse()

        return PowerSeries([a / other for a in self.coefficients], self.degree)

    def __rtruediv__(self, other: object) -> PowerSeries:
        return self._lift(other) * self.inverse()

    def __eq__(self, other: object) -> bool:
        if isinstance(other, PowerSeries):
            return self.coefficients == other.coefficients

        return self.coefficients == self._lift(other).coefficients

    def __hash__(self) -> int:
        return hash(self.coefficients)

    def __getitem__(self, n: int) -> Number:
        return self.coefficients[n]

    def evaluate(self, x: Number) -> Number:
        """Value of the truncated polynomial at x"""
        total: Number = Fraction(0)

        for value in reversed(self.coefficients):
            total = total * x + value

        return total

    def __repr__(self) -> str:
        terms = ", ".join(str(value) for value in self.coefficients)
        return f"PowerSeries([{terms}], degree={self.degree})"


def series_det(matrix: Sequence[Sequence[PowerSeries]]) -> PowerSeries:
    """Determinant by elimination, pivoting on entries with invertible constant term"""
    size = len(matrix)

    if size == 0:
        raise SingularMatrixError("Empty series matrix has no degree")

    rows = [list(row) for row in matrix]
    degree = rows[0][0].degree
    result = PowerSeries.constant(1, degree)

    for k in range(size):
        pivot_row = next(
            (i for i in range(k, size) if rows[i][k].coefficients[0] != 0), None
        )

        if pivot_row is None:
            raise SingularMatrixError("No invertible pivot in series matrix")

        if pivot_row != k:
            rows[k], rows[pivot_row] = rows[pivot_row], rows[k]
            result = -result

        pivot = rows[k][k]
        result = result * pivot
        pivot_inverse = pivot.inverse()

        for i in range(k + 1, size):
            factor = rows[i][k] * pivot_inverse

            if all(value == 0 for value in factor.coefficients):
                continue

            rows[i] = [
                entry - factor * rows[k][j] if j >= k else entry
                for j, entry in enumerate(rows[i])
            ]

    return result
