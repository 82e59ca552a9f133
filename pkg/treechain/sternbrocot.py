"""The Stern-Brocot tree and Markov chains on the positive rationals"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Callable
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, NamedTuple

from .arith import Number, format_number, parse_number
from .errors import DomainError, SpecFormatError
from .jobs import run_jobs
from .kernel import NeighborWeights, RandomWalk
from .stream import UniformStream
from .tree import NodeWord, complete_tree

_LOGGER = logging.getLogger(__name__)

ONE = Fraction(1)


class SbMaps(NamedTuple):
    left: Fraction
    right: Fraction
    parent: Fraction


def _require_positive(x: Fraction) -> Fraction:
    x = Fraction(x)

    if x <= 0:
        raise DomainError(f"{x} is not a positive rational")

    return x


def sb_left(x: Fraction) -> Fraction:
    """L(a/b) = a/(a+b)"""
    return Fraction(x.numerator, x.numerator + x.denominator)


def sb_right(x: Fraction) -> Fraction:
    """R(a/b) = (a+b)/b"""
    return Fraction(x.numerator + x.denominator, x.denominator)


def sb_parent(x: Fraction) -> Fraction:
    a, b = x.numerator, x.denominator

    if a > b:
        return Fraction(a - b, b)

    if a < b:
        return Fraction(a, b - a)

    return ONE


def sb_maps(x: Fraction) -> SbMaps:
    x = _require_positive(x)

    return SbMaps(sb_left(x), sb_right(x), sb_parent(x))


def sb_encode(u: NodeWord) -> Fraction:
    """Letter 0 applies L, letter 1 applies R, starting from 1/1"""
    a, b = 1, 1

    for letter in u:
        if letter == 0:
            b = a + b
        elif letter == 1:
            a = a + b
        else:
            raise DomainError(f"{u} is not a binary word")

    return Fraction(a, b)


def sb_decode(q: Fraction) -> NodeWord:
    """Run the parent map down to 1/1, reading letters backwards"""
    q = _require_positive(q)
    a, b = q.numerator, q.denominator
    letters: list[int] = []

    while a != b:
        # a run of identical letters is one Euclid step
        if a > b:
            count, a = divmod(a, b)

            if a == 0:
                count, a = count - 1, b

            letters.extend([1] * count)
        else:
            count, b = divmod(b, a)

            if b == 0:
                count, b = count - 1, a

            letters.extend([0] * count)

    return NodeWord(reversed(letters))


@dataclass(frozen=True)
class TransitionFamily:
    """Probabilities of R, L, P and staying, as functions on ℚ⁺

    P(1/1) = 1/1, so the parent share at the root is a self-loop.
    """

    right: Callable[[Fraction], Number]
    left: Callable[[Fraction], Number]
    parent: Callable[[Fraction], Number]
    stay: Callable[[Fraction], Number]
    constants: tuple[Number, Number, Number, Number] | None = field(default=None, compare=False)

    @classmethod
    def constant(
        cls, right: Number, left: Number, parent: Number, stay: Number | None = None
    ) -> TransitionFamily:
        right, left, parent = (parse_number(value) for value in (right, left, parent))
        stay = 1 - right - left - parent if stay is None else parse_number(stay)
        family = cls(
            lambda x: right,
            lambda x: left,
            lambda x: parent,
            lambda x: stay,
            (right, left, parent, stay),
        )
        family.validate(ONE)

        return family

    @classmethod
    def parse(cls, text: str) -> TransitionFamily:
        """"r=1/4,l=1/4,p=1/2[,s=0]" """
        values: dict[str, Number] = {}

        for item in text.split(","):
            key, sep, value = item.partition("=")

            if not sep or key.strip() not in ("r", "l", "p", "s"):
                raise SpecFormatError(f"Bad family entry {item!r}")

            values[key.strip()] = parse_number(value)

        try:
            return cls.constant(values["r"], values["l"], values["p"], values.get("s"))
        except KeyError as exc:
            raise SpecFormatError(f"Family misses {exc.args[0]}") from exc

    def probabilities(self, x: Fraction) -> tuple[Number, Number, Number, Number]:
        if self.constants is not None:
            return self.constants

        return (self.right(x), self.left(x), self.parent(x), self.stay(x))

    def validate(self, x: Fraction) -> None:
        values = self.probabilities(x)

        if any(value < 0 or value > 1 for value in values):
            raise DomainError(f"Transition probabilities at {x} leave [0, 1]")

        if abs(sum(values) - 1) > 1e-12:
            raise DomainError(f"Transition probabilities at {x} sum to {sum(values)}")

    def to_dict(self) -> dict[str, Any]:
        if self.constants is None:
            return {"family": "custom"}

        return dict(zip("rlps", (format_number(value) for value in self.constants)))


def sb_step(family: TransitionFamily, x: Fraction, stream: UniformStream) -> Fraction:
    right, left, parent, _ = family.probabilities(x)
    r = stream.uniform()

    if r < right:
        return sb_right(x)

    r -= right

    if r < left:
        return sb_left(x)

    r -= left

    if r < parent:
        return sb_parent(x)

    return x


def _largest_sum(depth: int) -> int:
    """Largest a + b over the labels a/b of depth <= depth: a Fibonacci number"""
    previous, current = 1, 2

    for _ in range(depth):
        previous, current = current, previous + current

    return current


@dataclass
class Trajectory:
    """Summary of one run of the chain"""

    start: Fraction
    steps: int
    first_return: int | None
    returns: int
    final: Fraction
    occupancy: Counter = field(default_factory=Counter)
    seed: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "start": format_number(self.start),
            "steps": self.steps,
            "first_return": self.first_return,
            "returns": self.returns,
            "final": format_number(self.final),
            "seed": self.seed,
        }


def sb_trajectory(
    family: TransitionFamily,
    start: Fraction,
    steps: int,
    seed: int | None | UniformStream = 0,
    *,
    stop_at_return: bool = False,
    occupancy_depth: int = 4,
) -> Trajectory:
    """Run the chain on numerator/denominator pairs, counting visits to 1/1"""
    start = _require_positive(start)
    stream = seed if isinstance(seed, UniformStream) else UniformStream(seed)
    a, b = start.numerator, start.denominator
    first_return = None
    returns = 0
    occupancy: Counter = Counter()
    fixed = family.constants
    sum_limit = _largest_sum(occupancy_depth)

    for t in range(1, steps + 1):
        if fixed is None:
            right, left, parent, _ = (float(v) for v in family.probabilities(Fraction(a, b)))
        else:
            right, left, parent = (float(v) for v in fixed[:3])

        r = stream.uniform()

        if r < right:
            a = a + b
        elif r < right + left:
            b = a + b
        elif r < right + left + parent:
            if a > b:
                a = a - b
            elif a < b:
                b = b - a

        if a == b:
            returns += 1

            if first_return is None:
                first_return = t

                if stop_at_return:
                    return Trajectory(start, t, t, 1, ONE, occupancy, stream.seed)

        if occupancy_depth and a + b <= sum_limit:
            if len(sb_decode(Fraction(a, b))) <= occupancy_depth:
                occupancy[Fraction(a, b)] += 1

    return Trajectory(start, steps, first_return, returns, Fraction(a, b), occupancy, stream.seed)


def sb_return_rate(
    family: TransitionFamily,
    start: Fraction,
    steps: int,
    runs: int,
    seed: int | None = 0,
    jobs: int = 1,
) -> float:
    """Share of independent trajectories that reach 1/1 within the step budget"""
    streams = UniformStream(seed).spawn(runs)
    trajectories = run_jobs(
        [
            lambda stream=stream: sb_trajectory(
                family, start, steps, stream, stop_at_return=True, occupancy_depth=0
            )
            for stream in streams
        ],
        jobs,
    )
    hits = sum(1 for trajectory in trajectories if trajectory.first_return is not None)
    _LOGGER.info("%d of %d trajectories returned to 1/1", hits, runs)

    return hits / runs


def family_kernel(family: TransitionFamily) -> RandomWalk:
    """The chain read on the binary tree through the Stern-Brocot labels"""
    tree = complete_tree(2)

    def weights(u: NodeWord) -> NeighborWeights:
        x = sb_encode(u)
        right, left, parent, stay = family.probabilities(x)

        if u.is_root:
            return NeighborWeights(parent - parent, (left, right), stay + parent)

        return NeighborWeights(parent, (left, right), stay)

    constant = family.constants is not None

    walk = RandomWalk(
        tree,
        weights,
        exact=constant and all(isinstance(value, Fraction) for value in family.constants),
        shape_key=len if constant else None,
        depth_homogeneous=constant,
        params={"stern_brocot": family.to_dict()},
    )

    return walk


def occupancy_by_node(trajectory: Trajectory) -> dict[NodeWord, int]:
    return {sb_decode(q): count for q, count in trajectory.occupancy.items()}

