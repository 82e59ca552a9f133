"""Continued fractions for weighted path generating functions"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Hashable
from dataclasses import dataclass, field
from typing import Any, Union

from .arith import Number, format_number
from .const import DEFAULT_CF_MAX_DEPTH, DEFAULT_TOL, TailMode
from .errors import DivergenceError, DomainError
from .kernel import AudKernel
from .series import PowerSeries
from .tree import NodeWord

_LOGGER = logging.getLogger(__name__)

Weight = Union[Number, PowerSeries]
LevelWeight = Callable[[int], Weight]

RESCALE_ABOVE = 1e100


def _constant(value: Weight) -> LevelWeight:
    return lambda level: value


def _is_zero(value: Weight) -> bool:
    if isinstance(value, PowerSeries):
        return value.coefficients[0] == 0

    return value == 0


def _render(value: Weight) -> Any:
    if isinstance(value, PowerSeries):
        return [format_number(c) for c in value.coefficients]

    return format_number(value)


@dataclass(frozen=True)
class StepWeights:
    """Weights w_{a,a}, w_{a,a+1}, w_{a,a-1} of Motzkin steps from level a"""

    stay: LevelWeight
    up: LevelWeight
    down: LevelWeight

    @classmethod
    def constant(cls, stay: Weight, up: Weight, down: Weight) -> StepWeights:
        return cls(_constant(stay), _constant(up), _constant(down))

    @classmethod
    def dyck(cls, x: Weight) -> StepWeights:
        """x per step, no horizontal steps"""
        return cls.constant(x - x, x, x)


@dataclass
class Convergent:
    depth: int
    value: Weight
    history: list[Weight] = field(default_factory=list)
    converged: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "depth": self.depth,
            "value": _render(self.value),
            "converged": self.converged,
        }


def _convergents(weights: StepWeights, max_depth: int):
    """Values of W_0 truncated below levels 1, 2, ..., max_depth + 1

    Forward three-term recurrence of 1/(c_0 − b_1/(c_1 − b_2/(...))) with
    c_a = 1 − w_{a,a} and b_a = w_{a−1,a} w_{a,a−1}.
    """
    numerator_prev: Weight = 1
    numerator: Weight = 0
    denominator_prev: Weight = 0
    denominator: Weight = 1

    for level in range(max_depth + 1):
        partial = 1 if level == 0 else -(weights.up(level - 1) * weights.down(level))
        head = 1 - weights.stay(level)

        numerator_prev, numerator = numerator, head * numerator + partial * numerator_prev
        denominator_prev, denominator = (
            denominator,
            head * denominator + partial * denominator_prev,
        )

        if _is_zero(denominator):
            raise DivergenceError(f"Denominator vanishes at depth {level}", level)

        if isinstance(denominator, float):
            scale = abs(denominator)

            if scale > RESCALE_ABOVE or scale < 1 / RESCALE_ABOVE:
                numerator_prev /= scale
                numerator /= scale
                denominator_prev /= scale
                denominator /= scale

        yield numerator / denominator


def cf_convergent(weights: StepWeights, h: int) -> Convergent:
    """Total weight of Motzkin excursions from 0 that stay strictly below level h + 1"""
    if h < 0:
        raise DomainError("Convergent depth must be non-negative")

    history = list(_convergents(weights, h))

    return Convergent(h, history[-1], history)


def cf_limit(
    weights: StepWeights, tol: float = DEFAULT_TOL, max_depth: int = DEFAULT_CF_MAX_DEPTH
) -> Convergent:
    """Convergents until two successive values agree within tol"""
    history: list[Weight] = []

    for depth, value in enumerate(_convergents(weights, max_depth)):
        history.append(value)

        if depth > 0 and abs(float(value) - float(history[-2])) <= tol * max(
            1.0, abs(float(value))
        ):
            return Convergent(depth, value, history)

    _LOGGER.warning("Continued fraction did not settle within depth %d", max_depth)

    return Convergent(max_depth, history[-1], history, converged=False)


def dyck_generating_function(x: float) -> float:
    """(1 − √(1 − 4x²)) / (2x²), weighting each step by x"""
    if x == 0:
        return 1.0

    if 4 * x * x > 1:
        raise DomainError("The Dyck series diverges for |x| > 1/2")

    return (1 - math.sqrt(1 - 4 * x * x)) / (2 * x * x)


def unit_continued_fraction(depth: int) -> float:
    """1 + 1/(1 + 1/(1 + ...)) with depth levels"""
    value = 1.0

    for _ in range(depth):
        value = 1 + 1 / value

    return value


def unit_nested_radical(depth: int) -> float:
    """√(1 + √(1 + ...)) with depth levels"""
    value = 1.0

    for _ in range(depth):
        value = math.sqrt(1 + value)

    return value


@dataclass(frozen=True)
class GreenValue:
    """Excursion generating function W_u and the return function H_u = 1 − 1/W_u"""

    node: NodeWord
    depth: int
    value: Weight
    previous: Weight | None
    converged: bool

    @property
    def return_value(self) -> Weight:
        return 1 - 1 / self.value

    def to_dict(self) -> dict[str, Any]:
        return {
            "node": str(self.node),
            "depth": self.depth,
            "value": _render(self.value),
            "return": _render(self.return_value),
            "converged": self.converged,
        }


def _settled(value: Weight, previous: Weight | None, tol: float) -> bool:
    if previous is None or isinstance(value, PowerSeries):
        return True

    return abs(float(value) - float(previous)) <= tol * max(1.0, abs(float(value)))


def _invert(denominator: Weight, node: NodeWord, depth: int) -> Weight:
    if _is_zero(denominator):
        raise DivergenceError(f"Excursion fraction at {node} has a vanishing denominator", depth)

    return 1 / denominator


class _WalkExcursions:
    """W_v = 1/(1 − xM_{v,v} − Σ_c xM_{v,c} xM_{c,v} W_c), memoized by shape"""

    def __init__(self, kernel: AudKernel, x: Weight, tail: TailMode):
        self.kernel = kernel
        self.x = x
        self.tail = tail
        self._memo: dict[tuple[Hashable, int], Weight] = {}

    def __call__(self, v: NodeWord, remaining: int) -> Weight:
        key = (self.kernel.shape_key(v), remaining)

        if key in self._memo:
            return self._memo[key]

        kernel = self.kernel
        x = self.x
        bracket = x * kernel.point_weight(v, v)

        for child in kernel.source.children(v):
            down = kernel.point_weight(v, child)

            if down == 0:
                continue

            if remaining > 0:
                inner = self(child, remaining - 1)
            elif self.tail == TailMode.ONE:
                inner = 1
            else:
                continue

            bracket = bracket + x * down * x * kernel.parent_weight(child) * inner

        value = _invert(1 - bracket, v, remaining)
        self._memo[key] = value

        return value


def green_rw(
    kernel: AudKernel,
    u: NodeWord,
    x: Weight,
    depth: int,
    tail: TailMode = TailMode.ZERO,
    tol: float = DEFAULT_TOL,
) -> GreenValue:
    """Generating function of walk excursions from u inside T_u, down to depth levels below u"""
    if not kernel.is_random_walk:
        raise DomainError("green_rw needs a random-walk kernel; use green_aud")

    u = NodeWord(u)
    excursions = _WalkExcursions(kernel, x, tail)
    value = excursions(u, depth)
    previous = excursions(u, depth - 1) if depth > 0 else None

    return GreenValue(u, depth, value, previous, _settled(value, previous, tol))


def _aud_excursions(
    kernel: AudKernel, u: NodeWord, x: Weight, depth: int, tail: TailMode
) -> Weight:
    """W_u for a general kernel by a bottom-up pass over T_u cut depth levels below u

    A jump u → v followed by the way back is weighted
    xU_{u,v} ∏_{a∈]]u,v]]} xU_{a,p(a)} W_a.
    """
    source = kernel.source
    bottom = len(u) + depth
    region = list(source.descendants(u, max_depth=bottom))
    beyond: dict[NodeWord, list[NodeWord]] = {}

    if tail == TailMode.ONE:
        for node in region:
            if len(node) == bottom:
                beyond[node] = source.children(node)

    excursion: dict[NodeWord, Weight] = {}

    for a in reversed(region):
        # climb[v]: weight of getting back from v to a through the excursions on the way
        bracket: Weight = x * kernel.point_weight(a, a)
        climb: dict[NodeWord, Weight] = {a: 1}

        for v in source.descendants(a, max_depth=bottom):
            if v == a:
                continue

            climb[v] = climb[v.parent] * x * kernel.parent_weight(v) * excursion[v]
            jump = kernel.point_weight(a, v)

            if jump != 0:
                bracket = bracket + x * jump * climb[v]

        for node, children in beyond.items():
            if not a.is_ancestor_of(node):
                continue

            for child in children:
                mass = kernel.subtree_mass(a, child)

                if mass != 0:
                    # the landing subtree counts as one node with an empty excursion
                    bracket = bracket + x * mass * x * kernel.parent_weight(child) * climb[node]

        excursion[a] = _invert(1 - bracket, a, depth)

    return excursion[u]


def green_aud(
    kernel: AudKernel,
    u: NodeWord,
    x: Weight,
    depth: int,
    tail: TailMode = TailMode.ZERO,
    tol: float = DEFAULT_TOL,
) -> GreenValue:
    """Excursion generating function of a general AUD kernel from u inside T_u"""
    u = NodeWord(u)
    value = _aud_excursions(kernel, u, x, depth, tail)
    previous = _aud_excursions(kernel, u, x, depth - 1, tail) if depth > 0 else None

    return GreenValue(u, depth, value, previous, _settled(value, previous, tol))


@dataclass(frozen=True)
class BinaryWalkParams:
    """Binary-tree walk whose row at u ≠ ∅ depends on the number k of zeros in u

    right: to u0 (k + 1 zeros), left: to u1 (k zeros), stay, up. The root has
    its own row.
    """

    right: LevelWeight
    left: LevelWeight
    stay: LevelWeight
    up: LevelWeight
    root_right: Number
    root_left: Number
    root_stay: Number

    @classmethod
    def constant(
        cls,
        right: Number,
        left: Number,
        stay: Number,
        up: Number,
        root: tuple[Number, Number, Number] | None = None,
    ) -> BinaryWalkParams:
        root_right, root_left, root_stay = root if root is not None else (right, left, stay)

        return cls(
            _constant(right),
            _constant(left),
            _constant(stay),
            _constant(up),
            root_right,
            root_left,
            root_stay,
        )


@dataclass
class BinaryGReport:
    values: list[float]
    iterated: list[float]
    residual: float
    branch: str
    root_value: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "g": self.values,
            "residual": self.residual,
            "branch": self.branch,
            "G_root": self.root_value,
        }


def _fixed_point_equation(params: BinaryWalkParams, k: int, g_k: float, g_next: float) -> float:
    alpha = float(params.left(k) * params.up(k))
    beta = float(params.right(k) * params.up(k + 1))

    return 1 / (1 - (float(params.stay(k)) + alpha * g_k + beta * g_next))


def _iterate(
    params: BinaryWalkParams, depth: int, start: float, tol: float, rounds: int
) -> list[float]:
    values = [start] * (depth + 1) + [0.0]

    for _ in range(rounds):
        updated = [
            _fixed_point_equation(params, k, values[k], values[k + 1]) for k in range(depth + 1)
        ] + [0.0]
        gap = max(abs(a - b) for a, b in zip(updated, values))
        values = updated

        if gap <= tol:
            break

    return values[:-1]


def binary_homogeneous_g(
    params: BinaryWalkParams, depth: int, tol: float = DEFAULT_TOL, rounds: int = 10_000
) -> BinaryGReport:
    """g_0..g_depth by the quadratic root, truncating g_{depth+1} = 0

    g_k = (1 − β_k g_{k+1} − s_k − √D_k) / (2α_k) with α_k = ℓ_k p_k,
    β_k = r_k p_{k+1}; the root is checked against a fixed-point iteration
    of the defining fractions started from zero.
    """
    iterated = _iterate(params, depth, 0.0, tol, rounds)
    values = [0.0] * (depth + 2)
    branch = "minus"

    for k in range(depth, -1, -1):
        alpha = float(params.left(k) * params.up(k))
        beta = float(params.right(k) * params.up(k + 1))
        linear = 1 - beta * values[k + 1] - float(params.stay(k))

        if alpha == 0:
            if linear == 0:
                raise DivergenceError(f"Denominator vanishes at level {k}", k)

            values[k] = 1 / linear
            continue

        discriminant = linear * linear - 4 * alpha

        if discriminant < 0:
            raise DomainError(
                f"Negative discriminant at level {k}: parameters are outside the convergence regime"
            )

        minus = (linear - math.sqrt(discriminant)) / (2 * alpha)
        plus = (linear + math.sqrt(discriminant)) / (2 * alpha)

        if abs(plus - iterated[k]) < abs(minus - iterated[k]):
            branch = "plus"
            values[k] = plus
        else:
            values[k] = minus

    values = values[:-1]
    residual = max(
        abs(
            values[k]
            - _fixed_point_equation(params, k, values[k], values[k + 1] if k < depth else 0.0)
        )
        for k in range(depth + 1)
    )

    # G_∅ pairs the root's left child (no zero) with g_0 and its right child with g_1
    g_1 = values[1] if depth >= 1 else 0.0
    bracket = (
        float(params.root_stay)
        + float(params.root_left * params.up(0)) * values[0]
        + float(params.root_right * params.up(1)) * g_1
    )
    root_value = 1 / (1 - bracket)
    _LOGGER.debug("Binary walk fractions: residual %.3g, branch %s", residual, branch)

    return BinaryGReport(values, iterated, residual, branch, root_value)

