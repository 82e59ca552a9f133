"""Numeric tower and dense linear algebra over exact rationals or binary64"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .const import NumericMode
from .errors import SingularMatrixError, SpecFormatError

Number = Union[Fraction, float]
Matrix = list[list[Number]]

_LOGGER = logging.getLogger(__name__)

ILL_CONDITIONED = 1e10


def is_exact(value: object) -> bool:
    """True for values carried exactly (ints and Fractions)"""
    return isinstance(value, (Fraction, int))


def all_exact(values: Iterable[object]) -> bool:
    return all(is_exact(value) for value in values)


def matrix_is_exact(matrix: Sequence[Sequence[object]]) -> bool:
    return all(all_exact(row) for row in matrix)


def parse_number(
    value: str | int | float | Fraction, mode: NumericMode | None = None
) -> Number:
    """Parse "9/23", "0.25", 3 or 0.5 into the numeric tower"""
    if isinstance(value, bool):
        raise SpecFormatError(f"Not a number: {value!r}")

    if isinstance(value, Fraction):
        result: Number = value
    elif isinstance(value, int):
        result = Fraction(value)
    elif isinstance(value, float):
        result = Fraction(repr(value)) if mode == NumericMode.EXACT else value
    elif isinstance(value, str):
        try:
            result = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecFormatError(f"Not a number: {value!r}") from exc
    else:
        raise SpecFormatError(f"Not a number: {value!r}")

    if mode == NumericMode.FLOAT:
        return float(result)

    return result


def format_number(value: Number | int) -> str:
    """Rationals as num/den, floats as the shortest round-trip decimal"""
    if isinstance(value, (Fraction, int)):
        value = Fraction(value)
        return f"{value.numerator}/{value.denominator}"

    return repr(float(value))


def to_float(value: Number | int) -> float:
    return float(value)


def coerce(value: Number | int, mode: NumericMode) -> Number:
    if mode == NumericMode.FLOAT:
        return float(value)

    if isinstance(value, float):
        return Fraction(repr(value))

    return Fraction(value)


def is_zero(value: Number, tol: float = 0.0) -> bool:
    if is_exact(value):
        return value == 0

    return abs(value) <= tol


@dataclass(frozen=True)
class Determinant:
    """A determinant with the arithmetic it was computed in"""

    value: Number
    exact: bool
    condition: float | None = None


def identity(size: int, one: Number = Fraction(1)) -> Matrix:
    zero = one - one
    return [[one if i == j else zero for j in range(size)] for i in range(size)]


def minor(
    matrix: Sequence[Sequence[Number]], rows: Iterable[int], cols: Iterable[int]
) -> Matrix:
    """Delete the given rows and columns"""
    drop_rows = set(rows)
    drop_cols = set(cols)

    return [
        [value for j, value in enumerate(row) if j not in drop_cols]
        for i, row in enumerate(matrix)
        if i not in drop_rows
    ]


def shifted(matrix: Sequence[Sequence[Number]], lam: Number = 1) -> Matrix:
    """λId − M"""
    return [
        [(lam if i == j else 0) - value for j, value in enumerate(row)]
        for i, row in enumerate(matrix)
    ]


def bareiss_det(matrix: Sequence[Sequence[Number]]) -> Fraction:
    """Fraction-free Bareiss elimination after clearing row denominators"""
    size = len(matrix)

    if size == 0:
        return Fraction(1)

    scale = 1
    rows: list[list[int]] = []

    for row in matrix:
        fractions = [Fraction(value) for value in row]
        multiplier = math.lcm(*(value.denominator for value in fractions))
        scale *= multiplier
        rows.append([int(value * multiplier) for value in fractions])

    sign = 1
    previous = 1

    for k in range(size - 1):
        if rows[k][k] == 0:
            for i in range(k + 1, size):
                if rows[i][k] != 0:
                    rows[k], rows[i] = rows[i], rows[k]
                    sign = -sign
                    break
            else:
                return Fraction(0)

        pivot = rows[k][k]

        for i in range(k + 1, size):
            row_i = rows[i]
            factor = row_i[k]
            row_k = rows[k]

            for j in range(k + 1, size):
                row_i[j] = (row_i[j] * pivot - factor * row_k[j]) // previous

        previous = pivot

    return Fraction(sign * rows[size - 1][size - 1], scale)


def float_det(matrix: Sequence[Sequence[Number]]) -> tuple[float, float]:
    """Partially pivoted LU determinant with a 2-norm condition estimate"""
    if len(matrix) == 0:
        return 1.0, 1.0

    array = np.array(matrix, dtype=float)
    value = float(np.linalg.det(array))

    with np.errstate(divide="ignore", invalid="ignore"):
        condition = float(np.linalg.cond(array))

    if condition > ILL_CONDITIONED:
        _LOGGER.warning(
            "Ill-conditioned %dx%d determinant (cond=%.3g)",
            len(matrix),
            len(matrix),
            condition,
        )

    return value, condition


def determinant(matrix: Sequence[Sequence[Number]]) -> Determinant:
    if matrix_is_exact(matrix):
        return Determinant(bareiss_det(matrix), True)

    value, condition = float_det(matrix)

    return Determinant(value, False, condition)


def det(matrix: Sequence[Sequence[Number]]) -> Number:
    return determinant(matrix).value


def solve(matrix: Sequence[Sequence[Number]], rhs: Sequence[Number]) -> list[Number]:
    """Solve matrix · x = rhs"""
    size = len(matrix)

    if not matrix_is_exact(matrix) or not all_exact(rhs):
        try:
            solution = np.linalg.solve(
                np.array(matrix, dtype=float), np.array(rhs, dtype=float)
            )
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(str(exc)) from exc

        return [float(value) for value in solution]

    augmented = [
        [Fraction(value) for value in row] + [Fraction(rhs[i])]
        for i, row in enumerate(matrix)
    ]

    for k in range(size):
        pivot_row = next(
            (i for i in range(k, size) if augmented[i][k] != 0),
            None,
        )

        if pivot_row is None:
            raise SingularMatrixError("Singular system")

        augmented[k], augmented[pivot_row] = augmented[pivot_row], augmented[k]
        pivot = augmented[k][k]

        for i in range(size):
            if i != k and augmented[i][k] != 0:
                factor = augmented[i][k] / pivot
                augmented[i] = [
                    value - factor * augmented[k][j]
                    for j, value in enumerate(augmented[i])
                ]

    return [augmented[k][size] / augmented[k][k] for k in range(size)]


def rank(matrix: Sequence[Sequence[Number]], tol: float = 1e-9) -> int:
    if len(matrix) == 0:
        return 0

    if not matrix_is_exact(matrix):
        return int(np.linalg.matrix_rank(np.array(matrix, dtype=float), tol=tol))

    rows = [[Fraction(value) for value in row] for row in matrix]
    width = len(rows[0])
    result = 0

    for col in range(width):
        pivot_row = next(
            (i for i in range(result, len(rows)) if rows[i][col] != 0), None
        )

        if pivot_row is None:
            continue

        rows[result], rows[pivot_row] = rows[pivot_row], rows[result]

        for i in range(result + 1, len(rows)):
            if rows[i][col] != 0:
                factor = rows[i][col] / rows[result][col]
                rows[i] = [
                    value - factor * rows[result][j] for j, value in enumerate(rows[i])
                ]

        result += 1

    return result


def char_poly(matrix: Sequence[Sequence[Number]]) -> list[Number]:
    """Coefficients c_0..c_n of det(λId − M), lowest degree first"""
    size = len(matrix)

    if not matrix_is_exact(matrix):
        coefficients = np.poly(np.array(matrix, dtype=float))
        return [float(value) for value in coefficients[::-1]]

    # Faddeev-LeVerrier
    a = [[Fraction(value) for value in row] for row in matrix]
    coefficients: list[Number] = [Fraction(0)] * (size + 1)
    coefficients[size] = Fraction(1)
    m = [[Fraction(0)] * size for _ in range(size)]

    for k in range(1, size + 1):
        for i in range(size):
            m[i][i] += coefficients[size - k + 1]

        am = [
            [sum(a[i][t] * m[t][j] for t in range(size)) for j in range(size)]
            for i in range(size)
        ]
        coefficients[size - k] = -sum(am[i][i] for i in range(size)) / k
        m = am

    return coefficients


def eigen_multiplicity(
    matrix: Sequence[Sequence[Number]], lam: Number, tol: float = 1e-7
) -> int:
    """Algebraic multiplicity of lam as an eigenvalue of matrix"""
    if matrix_is_exact(matrix) and is_exact(lam):
        coefficients = char_poly(matrix)
        multiplicity = 0

        while len(coefficients) > 1:
            # synthetic division by (λ − lam)
            quotient: list[Number] = []
            carry: Number = Fraction(0)

            for value in reversed(coefficients):
                carry = carry * lam + value
                quotient.append(carry)

            remainder = quotient.pop()

            if remainder != 0:
                break

            multiplicity += 1
            coefficients = list(reversed(quotient))

        return multiplicity

    eigenvalues = np.linalg.eigvals(np.array(matrix, dtype=float))
    scale = max(1.0, abs(complex(lam)))

    return int(np.sum(np.abs(eigenvalues - complex(lam)) <= tol * scale))
