"""AUD and ALD transition kernels, built-in families and structural checks"""

from __future__ import annotations

import logging
import threading
from abc import ABC, abstractmethod
from collections.abc import Callable, Hashable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Union

from .arith import Number, format_number, is_exact, parse_number
from .const import DEFAULT_TOL, KernelFamily, TreeFamily, ViolationKind
from .errors import DomainError, MissingCapabilityError, SpecFormatError
from .stream import UniformStream
from .tree import (
    ROOT,
    FiniteTree,
    NodeWord,
    TreeSource,
    Truncation,
    comb_tree,
    complete_tree,
    line_tree,
    rays_tree,
)

_LOGGER = logging.getLogger(__name__)


def _pow(base: Number, exponent: int) -> Number:
    """base**exponent keeping Fractions exact for negative exponents"""
    if is_exact(base):
        return Fraction(base) ** exponent

    return float(base) ** exponent


class AudKernel(ABC):
    """An almost upper-directed transition law: moves go to the parent or into T_u"""

    family: KernelFamily = KernelFamily.EXPLICIT
    is_random_walk: bool = False

    def __init__(self, source: TreeSource):
        self.source = source

    @property
    @abstractmethod
    def is_exact(self) -> bool:
        """Whether every weight is a Fraction"""

    @property
    def zero(self) -> Number:
        return Fraction(0) if self.is_exact else 0.0

    @property
    def one(self) -> Number:
        return Fraction(1) if self.is_exact else 1.0

    @abstractmethod
    def parent_weight(self, u: NodeWord) -> Number:
        """U_{u,p(u)}, zero at the root"""

    @abstractmethod
    def subtree_mass(self, u: NodeWord, v: NodeWord) -> Number:
        """U_{u,T_v} for v in T_u"""

    def point_weight(self, u: NodeWord, v: NodeWord) -> Number:
        """U_{u,v}"""
        if not u.is_root and v == u.parent:
            return self.parent_weight(u)

        if not u.is_ancestor_of(v):
            return self.zero

        mass = self.subtree_mass(u, v)

        for child in self.source.children(v):
            mass -= self.subtree_mass(u, child)

        return mass

    def off_support(self, u: NodeWord) -> dict[NodeWord, Number]:
        """Weights outside {p(u)} ∪ T_u; only explicit kernels can carry them"""
        return {}

    def row_total(self, u: NodeWord) -> Number:
        total = self.parent_weight(u) + self.subtree_mass(u, u)

        return total + sum(self.off_support(u).values(), self.zero)

    def shape_key(self, u: NodeWord) -> Hashable:
        """Nodes sharing a key carry isomorphic weighted subtrees"""
        return u

    def closed_form_invariant(self, u: NodeWord) -> Number | None:
        return None

    def closed_form_level_sum(self, depth: int) -> Number | None:
        return None

    def sample_step(self, u: NodeWord, stream: UniformStream) -> NodeWord:
        """Draw the next state by descending through subtree masses"""
        r = stream.uniform()

        if not u.is_root:
            up = float(self.parent_weight(u))

            if r < up:
                return u.parent

            r -= up

        node = u

        while True:
            stay = float(self.point_weight(u, node))

            if r < stay:
                return node

            r -= stay

            for child in self.source.children(node):
                mass = float(self.subtree_mass(u, child))

                if r < mass:
                    node = child
                    break

                r -= mass
            else:
                return node

    def describe(self) -> dict[str, Any]:
        return {"family": self.family.value}


class ExplicitKernel(AudKernel):
    """Row data on a finite tree"""

    family = KernelFamily.EXPLICIT

    def __init__(
        self, tree: FiniteTree, rows: Mapping[Sequence[int], Mapping[Sequence[int], Any]]
    ):
        super().__init__(tree)
        self.tree = tree
        self.rows: dict[NodeWord, dict[NodeWord, Number]] = {u: {} for u in tree.nodes}

        for u, row in rows.items():
            u = NodeWord(u)

            if u not in tree:
                raise SpecFormatError(f"Row given for unknown node {u}")

            for v, weight in row.items():
                v = NodeWord(v)
                weight = parse_number(weight)

                if v not in tree:
                    raise SpecFormatError(f"Entry ({u}, {v}) names an unknown node")

                if weight != 0:
                    self.rows[u][v] = weight

        self._exact = all(
            is_exact(weight) for row in self.rows.values() for weight in row.values()
        )
        self._masses: dict[NodeWord, dict[NodeWord, Number]] = {}

    @classmethod
    def from_dense(
        cls, tree: FiniteTree, matrix: Sequence[Sequence[Any]]
    ) -> ExplicitKernel:
        """Rows and columns in the tree's breadth-first order"""
        size = len(tree)

        if len(matrix) != size or any(len(row) != size for row in matrix):
            raise SpecFormatError(f"Expected a {size}x{size} matrix for this tree")

        return cls(
            tree,
            {
                tree.nodes[i]: {tree.nodes[j]: value for j, value in enumerate(row)}
                for i, row in enumerate(matrix)
            },
        )

    @property
    def is_exact(self) -> bool:
        return self._exact

    def _row(self, u: NodeWord) -> dict[NodeWord, Number]:
        try:
            return self.rows[u]
        except KeyError as exc:
            raise DomainError(f"{u} is not a node of the tree") from exc

    def _row_masses(self, u: NodeWord) -> dict[NodeWord, Number]:
        masses = self._masses.get(u)

        if masses is None:
            masses = {}

            for v, weight in self._row(u).items():
                if u.is_ancestor_of(v):
                    for depth in range(len(u), len(v) + 1):
                        key = v.prefix(depth)
                        masses[key] = masses.get(key, self.zero) + weight

            self._masses[u] = masses

        return masses

    def parent_weight(self, u: NodeWord) -> Number:
        if u.is_root:
            return self.zero

        return self._row(u).get(u.parent, self.zero)

    def subtree_mass(self, u: NodeWord, v: NodeWord) -> Number:
        return self._row_masses(u).get(v, self.zero)

    def point_weight(self, u: NodeWord, v: NodeWord) -> Number:
        return self._row(u).get(v, self.zero)

    def off_support(self, u: NodeWord) -> dict[NodeWord, Number]:
        return {
            v: weight
            for v, weight in self._row(u).items()
            if not u.is_ancestor_of(v) and (u.is_root or v != u.parent)
        }

    def dense(self) -> list[list[Number]]:
        return [
            [self.point_weight(u, v) for v in self.tree.nodes] for u in self.tree.nodes
        ]

    def with_row(self, u: NodeWord, row: Mapping[Sequence[int], Any]) -> ExplicitKernel:
        rows: dict[NodeWord, Mapping[Sequence[int], Any]] = dict(self.rows)
        rows[NodeWord(u)] = row

        return ExplicitKernel(self.tree, rows)

    def sample_step(self, u: NodeWord, stream: UniformStream) -> NodeWord:
        r = stream.uniform()
        items = sorted(self._row(u).items(), key=lambda item: item[0].sort_key())

        for v, weight in items:
            if r < float(weight):
                return v

            r -= float(weight)

        return items[-1][0]

    def describe(self) -> dict[str, Any]:
        return {
            "family": self.family.value,
            "rows": [[format_number(value) for value in row] for row in self.dense()],
        }


class _SizedFamily(AudKernel):
    """Families whose weights need finite subtree sizes"""

    def _size(self, u: NodeWord) -> int:
        size = self.source.subtree_size(u)

        if size is None:
            raise MissingCapabilityError(
                f"{self.family.value} kernel needs a finite subtree at {u}"
            )

        return size


class UniformDescendantOrParent(_SizedFamily):
    """From u jump uniformly into T_u ∪ {p(u)}, from the root uniformly into T"""

    family = KernelFamily.UNIFORM

    @property
    def is_exact(self) -> bool:
        return True

    def _denominator(self, u: NodeWord) -> int:
        return self._size(u) + (0 if u.is_root else 1)

    def parent_weight(self, u: NodeWord) -> Number:
        if u.is_root:
            return Fraction(0)

        return Fraction(1, self._denominator(u))

    def subtree_mass(self, u: NodeWord, v: NodeWord) -> Number:
        return Fraction(self._size(v), self._denominator(u))

    def closed_form_invariant(self, u: NodeWord) -> Number | None:
        if u.is_root:
            return Fraction(1)

        product = 1

        for v in u.ancestors()[1:-1]:
            product *= 1 + self._size(v)

        return Fraction((self._size(u) + 1) * product * self._size(u), self._size(ROOT))


class GeometricDescendant(_SizedFamily):
    """With probability p a uniform node of T_u, otherwise the parent (root: stay)"""

    family = KernelFamily.GEOMETRIC

    def __init__(self, source: TreeSource, p: Number | str):
        super().__init__(source)
        self.p = parse_number(p)

        if not 0 < self.p < 1:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")

    @property
    def is_exact(self) -> bool:
        return is_exact(self.p)

    def parent_weight(self, u: NodeWord) -> Number:
        if u.is_root:
            return self.zero

        return self.one - self.p

    def subtree_mass(self, u: NodeWord, v: NodeWord) -> Number:
        mass = self.p * self._size(v) / self._size(u)

        if u.is_root and v.is_root:
            mass += self.one - self.p

        return mass

    def closed_form_invariant(self, u: NodeWord) -> Number | None:
        if u.is_root:
            return self.one

        ratio = Fraction(self._size(u), self._size(ROOT))

        return ratio * self.p * _pow(self.one - self.p, -len(u))

    def describe(self) -> dict[str, Any]:
        return {"family": self.family.value, "p": format_number(self.p)}


@dataclass(frozen=True)
class LevelRow:
    """One row of an almost upper-triangular matrix on ℕ

    `forward[k]` is the weight of a jump from level i to level i + k.
    """

    down: Number
    forward: tuple[Number, ...]

    @property
    def total(self) -> Number:
        return self.down + sum(self.forward, Fraction(0))


class LevelKernel:
    """An almost upper-triangular transition matrix on ℕ; the last row repeats"""

    def __init__(self, rows: Sequence[LevelRow]):
        if not rows:
            raise SpecFormatError("A level kernel needs at least one row")

        if rows[0].down != 0:
            raise SpecFormatError("Level 0 cannot move down")

        self.rows = tuple(rows)
        self.is_exact = all(
            is_exact(row.down) and all(is_exact(value) for value in row.forward)
            for row in self.rows
        )

        for i, row in enumerate(self.rows):
            if abs(row.total - 1) > (0 if self.is_exact else DEFAULT_TOL):
                raise SpecFormatError(f"Level row {i} sums to {row.total}")

        self.zero: Number = Fraction(0) if self.is_exact else 0.0
        self._invariant: list[Number] = [self.zero + 1]
        self._lock = threading.Lock()

    @classmethod
    def birth_death(cls, forward: Number | str, backward: Number | str) -> LevelKernel:
        forward = parse_number(forward)
        backward = parse_number(backward)

        return cls(
            [
                LevelRow(forward - forward, (1 - forward, forward)),
                LevelRow(backward, (1 - forward - backward, forward)),
            ]
        )

    def row(self, i: int) -> LevelRow:
        return self.rows[min(i, len(self.rows) - 1)]

    def down(self, i: int) -> Number:
        if i == 0:
            return self.zero

        return self.row(i).down

    def weight(self, i: int, j: int) -> Number:
        if j == i - 1:
            return self.down(i)

        forward = self.row(i).forward

        if 0 <= j - i < len(forward):
            return forward[j - i]

        return self.zero

    def tail(self, i: int, j: int) -> Number:
        """Σ_{k >= j} of row i, for j >= i"""
        forward = self.row(i).forward

        return sum(forward[max(j - i, 0) :], self.zero)

    def invariant(self, h: int) -> Number:
        """ρ^ℕ_h by leaf addition on ℕ, normalized at 0"""
        with self._lock:
            values = self._invariant

            while len(values) <= h:
                k = len(values)
                down = self.down(k)

                if down == 0:
                    raise DomainError(f"Level kernel cannot move down from {k}")

                total = sum(
                    (values[j] * self.tail(j, k) for j in range(k)), self.zero
                )
                values.append(total / down)

            return values[h]

    def describe(self) -> list[dict[str, Any]]:
        return [
            {
                "down": format_number(row.down),
                "forward": [format_number(value) for value in row.forward],
            }
            for row in self.rows
        ]


class HeightDriven(AudKernel):
    """A kernel on ℕ spread evenly over the levels of the complete d-ary tree"""

    family = KernelFamily.HEIGHT_DRIVEN

    def __init__(self, arity: int, level: LevelKernel, source: TreeSource | None = None):
        super().__init__(source if source is not None else complete_tree(arity))
        self.arity = arity
        self.level = level

    @property
    def is_exact(self) -> bool:
        return self.level.is_exact

    def parent_weight(self, u: NodeWord) -> Number:
        if u.is_root:
            return self.zero

        return self.level.down(len(u))

    def subtree_mass(self, u: NodeWord, v: NodeWord) -> Number:
        spread = _pow(self.one * self.arity, len(u) - len(v))

        return spread * self.level.tail(len(u), len(v))

    def shape_key(self, u: NodeWord) -> Hashable:
        return len(u)

    def closed_form_invariant(self, u: NodeWord) -> Number | None:
        return self.level.invariant(len(u)) * _pow(self.one * self.arity, -len(u))

    def closed_form_level_sum(self, depth: int) -> Number | None:
        return self.level.invariant(depth)

    def describe(self) -> dict[str, Any]:
        return {
            "family": self.family.value,
            "arity": self.arity,
            "levels": self.level.describe(),
        }


class LeafJump(AudKernel):
    """Up with probability 1−p, otherwise to a leaf of T_u weighted d^{-distance}

    Needs a full d-ary tree (d or no children everywhere) with countably many
    ends, such as the comb.  With `lazy_root` the root jumps with probability p
    and stays otherwise; without it the root always jumps.
    """

    family = KernelFamily.LEAF_JUMP

    def __init__(
        self,
        p: Number | str,
        arity: int,
        source: TreeSource | None = None,
        lazy_root: bool = True,
    ):
        super().__init__(source if source is not None else comb_tree(arity))
        self.p = parse_number(p)
        self.arity = arity
        self.lazy_root = lazy_root

        if not 0 < self.p < 1:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")

    @property
    def is_exact(self) -> bool:
        return is_exact(self.p)

    def _jump(self, u: NodeWord) -> Number:
        if u.is_root and not self.lazy_root:
            return self.one

        return self.p

    def parent_weight(self, u: NodeWord) -> Number:
        if u.is_root:
            return self.zero

        return self.one - self.p

    def subtree_mass(self, u: NodeWord, v: NodeWord) -> Number:
        mass = self._jump(u) * _pow(self.one * self.arity, len(u) - len(v))

        if self.lazy_root and u.is_root and v.is_root:
            mass += self.one - self.p

        return mass

    def closed_form_invariant(self, u: NodeWord) -> Number | None:
        if u.is_root:
            return self.one

        k = len(u)
        value = _pow(self.one * self.arity, -k) * _pow(self.one - self.p, -k)

        return value * self.p if self.lazy_root else value

    def closed_form_level_sum(self, depth: int) -> Number | None:
        size = self.source.level_size(depth)

        if size is None:
            return None

        return size * self.closed_form_invariant(NodeWord((0,) * depth))

    def describe(self) -> dict[str, Any]:
        return {
            "family": self.family.value,
            "p": format_number(self.p),
            "arity": self.arity,
            "lazy_root": self.lazy_root,
        }


@dataclass(frozen=True)
class NeighborWeights:
    """One random-walk row: to the parent, to each child, and staying put"""

    parent: Number
    children: tuple[Number, ...]
    stay: Number

    @classmethod
    def balanced(cls, parent: Number, children: Sequence[Number]) -> NeighborWeights:
        return cls(parent, tuple(children), 1 - parent - sum(children, parent - parent))


class RandomWalk(AudKernel):
    """Nearest-neighbor walk: simultaneously AUD and ALD"""

    family = KernelFamily.RANDOM_WALK
    is_random_walk = True

    def __init__(
        self,
        source: TreeSource,
        weights: Callable[[NodeWord], NeighborWeights],
        *,
        exact: bool = True,
        shape_key: Callable[[NodeWord], Hashable] | None = None,
        depth_homogeneous: bool = False,
        params: Mapping[str, Any] | None = None,
    ):
        super().__init__(source)
        self._weights = weights
        self._exact = exact
        self._shape_key = shape_key
        self.depth_homogeneous = depth_homogeneous
        self.params = dict(params or {})
        self._memo: dict[NodeWord, NeighborWeights] = {}

    @property
    def is_exact(self) -> bool:
        return self._exact

    def neighbors(self, u: NodeWord) -> NeighborWeights:
        cached = self._memo.get(u)

        if cached is not None:
            return cached

        row = self._weights(u)

        if len(row.children) != self.source.child_count(u):
            raise DomainError(
                f"{u} has {self.source.child_count(u)} children but "
                f"{len(row.children)} child weights"
            )

        if u.is_root and row.parent != 0:
            raise DomainError("The root cannot move to a parent")

        self._memo[u] = row

        return row

    def parent_weight(self, u: NodeWord) -> Number:
        if u.is_root:
            return self.zero

        return self.neighbors(u).parent

    def child_weight(self, u: NodeWord, child: NodeWord) -> Number:
        return self.neighbors(u).children[child[-1]]

    def subtree_mass(self, u: NodeWord, v: NodeWord) -> Number:
        row = self.neighbors(u)

        if v == u:
            return row.stay + sum(row.children, self.zero)

        if len(v) == len(u) + 1 and u.is_ancestor_of(v):
            return row.children[v[-1]]

        return self.zero

    def point_weight(self, u: NodeWord, v: NodeWord) -> Number:
        if not u.is_root and v == u.parent:
            return self.neighbors(u).parent

        if v == u:
            return self.neighbors(u).stay

        if len(v) == len(u) + 1 and u.is_ancestor_of(v):
            return self.neighbors(u).children[v[-1]]

        return self.zero

    def shape_key(self, u: NodeWord) -> Hashable:
        if self._shape_key is None:
            return u

        return self._shape_key(u)

    def closed_form_invariant(self, u: NodeWord) -> Number | None:
        """Product of edge ratios M_{u[j-1],u[j]} / M_{u[j],u[j-1]}"""
        value = self.one

        for node in u.ancestors()[1:]:
            back = self.parent_weight(node)

            if back == 0:
                raise DomainError(f"Zero parent weight at {node}")

            value = value * self.child_weight(node.parent, node) / back

        return value

    def closed_form_level_sum(self, depth: int) -> Number | None:
        if not self.depth_homogeneous:
            return None

        size = self.source.level_size(depth)

        if size is None:
            return None

        return size * self.closed_form_invariant(NodeWord((0,) * depth))

    def sample_step(self, u: NodeWord, stream: UniformStream) -> NodeWord:
        row = self.neighbors(u)
        r = stream.uniform()

        if not u.is_root:
            if r < float(row.parent):
                return u.parent

            r -= float(row.parent)

        for index, weight in enumerate(row.children):
            if r < float(weight):
                return u.child(index)

            r -= float(weight)

        return u

    @classmethod
    def homogeneous(
        cls, source: TreeSource, parent: Number | str, child: Number | str
    ) -> RandomWalk:
        """Same parent and per-child weight everywhere; the rest stays put"""
        parent = parse_number(parent)
        child = parse_number(child)

        def weights(u: NodeWord) -> NeighborWeights:
            count = source.child_count(u)
            up = parent - parent if u.is_root else parent

            return NeighborWeights.balanced(up, (child,) * count)

        symmetric = source.name in (TreeFamily.COMPLETE, TreeFamily.LINE)

        return cls(
            source,
            weights,
            exact=is_exact(parent) and is_exact(child),
            shape_key=len if symmetric else None,
            depth_homogeneous=symmetric,
            params={
                "tree": source.name,
                "parent": format_number(parent),
                "child": format_number(child),
            },
        )

    @classmethod
    def birth_death(
        cls, forward: Number | str, backward: Number | str
    ) -> RandomWalk:
        """Birth-death chain on the line; backward moves toward the root"""
        walk = cls.homogeneous(line_tree(), parent=backward, child=forward)
        walk.family = KernelFamily.BIRTH_DEATH

        return walk

    @classmethod
    def integer_walk(cls, forward: Number | str = Fraction(2, 3)) -> RandomWalk:
        """The biased walk on ℤ seen as a two-ray tree rooted at 0

        Child 0 of the root starts the positive ray, child 1 the negative one.
        """
        forward = parse_number(forward)
        backward = 1 - forward
        zero = forward - forward

        def weights(u: NodeWord) -> NeighborWeights:
            if u.is_root:
                return NeighborWeights(zero, (forward, backward), zero)

            if u[0] == 0:
                return NeighborWeights(backward, (forward,), zero)

            return NeighborWeights(forward, (backward,), zero)

        walk = cls(
            rays_tree(2),
            weights,
            exact=is_exact(forward),
            shape_key=lambda u: ("ray", u[0]) if u else ("root",),
            params={"forward": format_number(forward)},
        )
        walk.family = KernelFamily.INTEGER_WALK

        return walk

    def describe(self) -> dict[str, Any]:
        return {"family": self.family.value, **self.params}


class DegreeHomogeneous(RandomWalk):
    """Up with F(k), to each child with G(k), where k is the number of children

    The root has no parent; its F(k) share stays at the root.
    """

    family = KernelFamily.DEGREE_HOMOGENEOUS

    def __init__(
        self,
        source: TreeSource,
        up: Callable[[int], Number],
        per_child: Callable[[int], Number],
        *,
        exact: bool = True,
        params: Mapping[str, Any] | None = None,
    ):
        def weights(u: NodeWord) -> NeighborWeights:
            count = source.child_count(u)
            g = per_child(count)

            if u.is_root:
                return NeighborWeights(g - g, (g,) * count, 1 - count * g)

            return NeighborWeights(up(count), (g,) * count, 1 - up(count) - count * g)

        super().__init__(source, weights, exact=exact, params=params)
        self.up = up
        self.per_child = per_child


class AldKernel(ABC):
    """An almost lower-directed transition law: moves go to a child or an ancestor"""

    def __init__(self, source: TreeSource):
        self.source = source

    @property
    @abstractmethod
    def is_exact(self) -> bool:
        """Whether every weight is a Fraction"""

    @property
    def zero(self) -> Number:
        return Fraction(0) if self.is_exact else 0.0

    @abstractmethod
    def child_weight(self, u: NodeWord, child: NodeWord) -> Number:
        """D_{u,c}"""

    @abstractmethod
    def ancestor_weight(self, u: NodeWord, ancestor: NodeWord) -> Number:
        """D_{u,a} for a in [[∅, u]]"""

    def point_weight(self, u: NodeWord, v: NodeWord) -> Number:
        if len(v) == len(u) + 1 and u.is_ancestor_of(v):
            return self.child_weight(u, v)

        if v.is_ancestor_of(u):
            return self.ancestor_weight(u, v)

        return self.zero

    def off_support(self, u: NodeWord) -> dict[NodeWord, Number]:
        return {}

    def row_total(self, u: NodeWord) -> Number:
        total = sum(
            (self.child_weight(u, child) for child in self.source.children(u)),
            self.zero,
        )
        total += sum(
            (self.ancestor_weight(u, a) for a in u.ancestors()), self.zero
        )

        return total + sum(self.off_support(u).values(), self.zero)


class ExplicitAldKernel(AldKernel):
    """ALD row data on a finite tree"""

    def __init__(self, tree: FiniteTree, rows: Mapping[NodeWord, Mapping[NodeWord, Number]]):
        super().__init__(tree)
        self.tree = tree
        self.rows = {
            u: {v: weight for v, weight in rows.get(u, {}).items() if weight != 0}
            for u in tree.nodes
        }
        self._exact = all(
            is_exact(weight) for row in self.rows.values() for weight in row.values()
        )

    @property
    def is_exact(self) -> bool:
        return self._exact

    def child_weight(self, u: NodeWord, child: NodeWord) -> Number:
        return self.rows[u].get(child, self.zero)

    def ancestor_weight(self, u: NodeWord, ancestor: NodeWord) -> Number:
        return self.rows[u].get(ancestor, self.zero)

    def point_weight(self, u: NodeWord, v: NodeWord) -> Number:
        return self.rows[u].get(v, self.zero)

    def off_support(self, u: NodeWord) -> dict[NodeWord, Number]:
        return {
            v: weight
            for v, weight in self.rows[u].items()
            if not v.is_ancestor_of(u) and not (len(v) == len(u) + 1 and u.is_ancestor_of(v))
        }

    def dense(self) -> list[list[Number]]:
        return [
            [self.point_weight(u, v) for v in self.tree.nodes] for u in self.tree.nodes
        ]


AnyKernel = Union[AudKernel, AldKernel]


@dataclass(frozen=True)
class Violation:
    """A structural defect found on a truncation"""

    kind: ViolationKind
    node: NodeWord
    target: NodeWord | None
    detail: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "node": str(self.node),
            "target": None if self.target is None else str(self.target),
            "detail": self.detail,
        }


def _check_row_total(
    kernel: AnyKernel, u: NodeWord, tol: float, violations: list[Violation]
):
    total = kernel.row_total(u)

    if abs(total - 1) > tol:
        violations.append(
            Violation(
                ViolationKind.STOCHASTIC, u, None, f"row sums to {format_number(total)}"
            )
        )


def _check_off_support(kernel: AnyKernel, u: NodeWord, violations: list[Violation]):
    for v, weight in kernel.off_support(u).items():
        violations.append(
            Violation(
                ViolationKind.SUPPORT,
                u,
                v,
                f"weight {format_number(weight)} outside the allowed support",
            )
        )


def validate_aud(
    kernel: AudKernel, trunc: Truncation, tol: float = DEFAULT_TOL
) -> list[Violation]:
    """Support, sign, stochasticity and mass consistency on a truncation"""
    violations: list[Violation] = []

    for u in trunc:
        _check_off_support(kernel, u, violations)

        if kernel.parent_weight(u) < -tol:
            violations.append(
                Violation(ViolationKind.NEGATIVE, u, u.parent, "negative parent weight")
            )

        _check_row_total(kernel, u, tol, violations)

        pending = [u]

        while pending:
            v = pending.pop()
            weight = kernel.point_weight(u, v)

            if weight < -tol:
                violations.append(
                    Violation(
                        ViolationKind.NEGATIVE, u, v, f"weight {format_number(weight)}"
                    )
                )

            if len(v) < trunc.height_bound:
                children = kernel.source.children(v)
                residual = kernel.subtree_mass(u, v) - weight
                residual -= sum(
                    (kernel.subtree_mass(u, child) for child in children), kernel.zero
                )

                if abs(residual) > tol:
                    violations.append(
                        Violation(
                            ViolationKind.CONSISTENCY,
                            u,
                            v,
                            f"subtree mass off by {format_number(residual)}",
                        )
                    )

                pending.extend(child for child in children if child in trunc)

    if violations:
        _LOGGER.debug("Found %d violations on %d nodes", len(violations), len(trunc))

    return violations


def validate_ald(
    kernel: AldKernel, trunc: Truncation, tol: float = DEFAULT_TOL
) -> list[Violation]:
    violations: list[Violation] = []

    for u in trunc:
        _check_off_support(kernel, u, violations)

        for v in [*u.ancestors(), *kernel.source.children(u)]:
            weight = kernel.point_weight(u, v)

            if weight < -tol:
                violations.append(
                    Violation(
                        ViolationKind.NEGATIVE, u, v, f"weight {format_number(weight)}"
                    )
                )

        _check_row_total(kernel, u, tol, violations)

    return violations


@dataclass(frozen=True)
class Pass:
    """Irreducibility certified up to a depth"""

    certification_depth: int

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class CounterexampleNode:
    node: NodeWord
    reason: str

    def __bool__(self) -> bool:
        return False


def check_irreducible(kernel: AnyKernel, trunc: Truncation) -> Pass | CounterexampleNode:
    """The positivity criteria for AUD, ALD and random-walk kernels"""
    if isinstance(kernel, AldKernel):
        return _check_irreducible_ald(kernel, trunc)

    for u in trunc.nodes[1:]:
        if not kernel.parent_weight(u) > 0:
            return CounterexampleNode(u, "zero weight to the parent")

        if kernel.is_random_walk:
            if not kernel.point_weight(u.parent, u) > 0:
                return CounterexampleNode(u, "zero weight from the parent")

            continue

        if not any(kernel.subtree_mass(a, u) > 0 for a in u.ancestors()[:-1]):
            return CounterexampleNode(u, "no strict ancestor sends mass into the subtree")

    return Pass(trunc.height_bound)


def _check_irreducible_ald(kernel: AldKernel, trunc: Truncation) -> Pass | CounterexampleNode:
    for v in trunc.nodes[1:]:
        if not kernel.child_weight(v.parent, v) > 0:
            return CounterexampleNode(v, "zero weight from the parent")

        strict = v.ancestors()[:-1]
        below = [w for w in trunc.nodes if v.is_ancestor_of(w)]

        if not any(kernel.ancestor_weight(w, a) > 0 for w in below for a in strict):
            return CounterexampleNode(v, "no descendant returns above the node")

    return Pass(trunc.height_bound)
