"""Rooted trees: node words, finite and lazy sources, truncations and ends"""

from __future__ import annotations

import logging
import math
import threading
from abc import ABC, abstractmethod
from collections import deque
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

from .const import DEFAULT_NODE_CAP, DEFAULT_PROBE_DEPTH, ROOT_LABEL, TreeFamily
from .errors import DomainError, ResourceLimitError, SpecFormatError

_LOGGER = logging.getLogger(__name__)


class NodeWord(tuple):
    """A node address: the 0-based child indices read from the root"""

    __slots__ = ()

    def __new__(cls, letters: Iterable[int] = ()):
        return super().__new__(cls, letters)

    @property
    def depth(self) -> int:
        return len(self)

    @property
    def is_root(self) -> bool:
        return len(self) == 0

    @property
    def parent(self) -> NodeWord:
        if not self:
            raise DomainError("The root has no parent")

        return NodeWord(self[:-1])

    def child(self, index: int) -> NodeWord:
        return NodeWord((*self, index))

    def prefix(self, depth: int) -> NodeWord:
        return NodeWord(self[:depth])

    def ancestors(self) -> list[NodeWord]:
        """[[∅, self]] from the root down"""
        return [self.prefix(depth) for depth in range(len(self) + 1)]

    def is_ancestor_of(self, other: Sequence[int]) -> bool:
        """Prefix order, reflexive"""
        return len(self) <= len(other) and tuple(other[: len(self)]) == tuple(self)

    def branch_successor(self, target: NodeWord) -> NodeWord:
        """s(self, target): the child of self on the path to target"""
        if len(self) >= len(target) or not self.is_ancestor_of(target):
            raise DomainError(f"{self} is not a strict ancestor of {target}")

        return target.prefix(len(self) + 1)

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return (len(self), tuple(self))

    def __str__(self) -> str:
        if not self:
            return ROOT_LABEL

        return ".".join(str(letter) for letter in self)

    def __repr__(self) -> str:
        return f"NodeWord({str(self)!r})"

    @classmethod
    def parse(cls, text: str) -> NodeWord:
        text = text.strip()

        if text in (ROOT_LABEL, "", "root", "()"):
            return ROOT

        try:
            letters = [int(part) for part in text.split(".")]
        except ValueError as exc:
            raise SpecFormatError(f"Invalid node word: {text!r}") from exc

        if any(letter < 0 for letter in letters):
            raise SpecFormatError(f"Invalid node word: {text!r}")

        return cls(letters)


ROOT = NodeWord()


def ancestors(u: Sequence[int]) -> list[NodeWord]:
    return NodeWord(u).ancestors()


def bfs_sorted(nodes: Iterable[NodeWord]) -> list[NodeWord]:
    return sorted((NodeWord(node) for node in nodes), key=NodeWord.sort_key)


@dataclass(frozen=True)
class Ray:
    """A root-started ray: prefix letters then the period repeated forever"""

    prefix: tuple[int, ...] = ()
    period: tuple[int, ...] = ()
    label: str | None = None

    @property
    def is_finite(self) -> bool:
        """Rays without a period stop after their prefix (frozen samples)"""
        return not self.period

    @property
    def name(self) -> str:
        if self.label:
            return self.label

        prefix = ".".join(str(letter) for letter in self.prefix)
        period = ".".join(str(letter) for letter in self.period)

        return f"{prefix}({period})*" if period else prefix

    def letter(self, index: int) -> int:
        if index < len(self.prefix):
            return self.prefix[index]

        if not self.period:
            raise DomainError(f"Ray {self.name} stops at depth {len(self.prefix)}")

        return self.period[(index - len(self.prefix)) % len(self.period)]

    def node(self, depth: int) -> NodeWord:
        return NodeWord(self.letter(index) for index in range(depth))

    def passes_through(self, u: Sequence[int]) -> bool:
        if self.is_finite and len(u) > len(self.prefix):
            return False

        return all(u[index] == self.letter(index) for index in range(len(u)))

    def divergence_depth(self, other: Ray) -> int | None:
        """Depth of the last common node L(self, other), None for identical rays"""
        horizon = max(len(self.prefix), len(other.prefix))
        horizon += math.lcm(max(len(self.period), 1), max(len(other.period), 1))

        for index in range(horizon):
            try:
                mine = self.letter(index)
                theirs = other.letter(index)
            except DomainError:
                return index

            if mine != theirs:
                return index

        return None

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any] = {"prefix": list(self.prefix), "period": list(self.period)}

        if self.label:
            result["label"] = self.label

        return result


@dataclass(frozen=True)
class EndDescription:
    """Declared or probed ends with their sources"""

    ends: tuple[Ray, ...]
    sources: tuple[NodeWord, ...]
    probed: bool = False

    def __post_init__(self):
        if len(self.ends) != len(self.sources):
            raise DomainError("Every end needs exactly one source")

    def last_common_node(self, first: int, second: int) -> NodeWord:
        """L(p, q)"""
        depth = self.ends[first].divergence_depth(self.ends[second])

        if depth is None:
            raise DomainError("An end has no last common node with itself")

        return self.ends[first].node(depth)

    def skeleton_contains(self, u: Sequence[int]) -> bool:
        """Membership in P(T), the union of the ends"""
        return any(ray.passes_through(u) for ray in self.ends)

    def skeleton_children(self, u: NodeWord) -> set[NodeWord]:
        result = set()

        for ray in self.ends:
            if ray.passes_through(u) and not (
                ray.is_finite and len(u) >= len(ray.prefix)
            ):
                result.add(u.child(ray.letter(len(u))))

        return result

    def core(self) -> set[NodeWord]:
        """Core(T): strict ancestors of the sources"""
        result: set[NodeWord] = set()

        for source in self.sources:
            result.update(source.ancestors()[:-1])

        return result

    def excess_branching(self) -> int:
        """Σ over P(T) of (number of P(T)-children − 1)"""
        horizon = 0

        for i, ray in enumerate(self.ends):
            for other in self.ends[i + 1 :]:
                depth = ray.divergence_depth(other)

                if depth is None:
                    raise DomainError(f"End {ray.name} is declared twice")

                horizon = max(horizon, depth + 1)

        total = 0

        for depth in range(horizon):
            for node in {ray.node(depth) for ray in self.ends}:
                total += len(self.skeleton_children(node)) - 1

        return total


@dataclass(frozen=True)
class Undetermined:
    """End structure could not be decided from a probe"""

    probe_depth: int
    frontier: tuple[NodeWord, ...]
    reason: str


def describe_ends(rays: Sequence[Ray], probed: bool = False) -> EndDescription:
    sources = []

    for i, ray in enumerate(rays):
        others = [other for j, other in enumerate(rays) if j != i]
        depth = 0

        while True:
            node = ray.node(depth)

            if not any(other.passes_through(node) for other in others):
                sources.append(node)
                break

            depth += 1

    return EndDescription(tuple(rays), tuple(sources), probed)


class TreeSource(ABC):
    """A locally finite rooted tree"""

    name: str = "tree"
    ends: tuple[Ray, ...] | None = None
    uncountable_ends: bool = False
    leafless: bool | None = None

    @abstractmethod
    def child_count(self, u: NodeWord) -> int:
        """Number of children of u"""

    @property
    def is_finite(self) -> bool:
        return False

    def children(self, u: NodeWord) -> list[NodeWord]:
        return [u.child(index) for index in range(self.child_count(u))]

    def contains(self, u: Sequence[int]) -> bool:
        u = NodeWord(u)

        for depth in range(len(u)):
            if u.prefix(depth + 1) not in self.children(u.prefix(depth)):
                return False

        return True

    def is_finite_subtree(self, u: NodeWord) -> bool | None:
        """Whether T_u is finite, None when nothing says"""
        if self.uncountable_ends:
            return False

        if self.ends is not None:
            return not any(ray.passes_through(u) for ray in self.ends)

        return None

    def descendants(
        self, u: NodeWord, max_depth: int | None = None, cap: int = DEFAULT_NODE_CAP
    ) -> Iterator[NodeWord]:
        """T_u in breadth-first order, down to an absolute depth"""
        queue = deque([u])
        count = 0

        while queue:
            node = queue.popleft()
            count += 1

            if count > cap:
                raise ResourceLimitError(f"More than {cap} nodes below {u}", cap=cap)

            yield node

            if max_depth is None or len(node) < max_depth:
                queue.extend(self.children(node))

    def subtree_size(self, u: NodeWord) -> int | None:
        if self.is_finite_subtree(u) is not True:
            return None

        return sum(1 for _ in self.descendants(u))

    def level_size(self, depth: int) -> int | None:
        """Number of nodes at a depth, when the family knows it"""
        return None

    def describe(self) -> dict[str, Any]:
        return {"type": "lazy", "family": self.name}


class FiniteTree(TreeSource):
    """An explicit finite tree; node words are kept as given"""

    name = "finite"
    leafless = False

    def __init__(
        self,
        children: Mapping[NodeWord, Sequence[NodeWord]],
        *,
        ends: Sequence[Ray] | None = None,
    ):
        self._children: dict[NodeWord, tuple[NodeWord, ...]] = {}
        queue = deque([ROOT])

        while queue:
            node = queue.popleft()
            kids = tuple(NodeWord(kid) for kid in children.get(node, ()))

            for kid in kids:
                if len(kid) != len(node) + 1 or not node.is_ancestor_of(kid):
                    raise SpecFormatError(f"{kid} is not a child of {node}")

            self._children[node] = tuple(sorted(kids))
            queue.extend(self._children[node])

        self.nodes: tuple[NodeWord, ...] = tuple(bfs_sorted(self._children))
        self.index = {node: i for i, node in enumerate(self.nodes)}
        self.ends = tuple(ends) if ends is not None else None

        self._sizes: dict[NodeWord, int] = {}

        for node in reversed(self.nodes):
            self._sizes[node] = 1 + sum(self._sizes[kid] for kid in self._children[node])

    @classmethod
    def from_counts(
        cls, counts: Sequence[int], *, ends: Sequence[Ray] | None = None
    ) -> FiniteTree:
        """Breadth-first children counts, root first"""
        if not counts or any(count < 0 for count in counts):
            raise SpecFormatError("Children counts must be non-negative and non-empty")

        if 1 + sum(counts) != len(counts):
            raise SpecFormatError(
                f"{len(counts)} counts describe {1 + sum(counts)} nodes"
            )

        children: dict[NodeWord, list[NodeWord]] = {}
        queue = deque([ROOT])
        position = 0

        while queue:
            node = queue.popleft()
            kids = [node.child(index) for index in range(counts[position])]
            position += 1
            children[node] = kids
            queue.extend(kids)

        return cls(children, ends=ends)

    @classmethod
    def from_nodes(
        cls,
        nodes: Iterable[Sequence[int]],
        *,
        require_left_closed: bool = True,
        ends: Sequence[Ray] | None = None,
    ) -> FiniteTree:
        node_set = {NodeWord(node) for node in nodes}

        if ROOT not in node_set:
            raise SpecFormatError("A tree must contain the root")

        children: dict[NodeWord, list[NodeWord]] = {}

        for node in node_set:
            if node.is_root:
                continue

            if node.parent not in node_set:
                raise SpecFormatError(f"{node} is present but its parent is not")

            if require_left_closed and node[-1] > 0:
                if node.parent.child(node[-1] - 1) not in node_set:
                    raise SpecFormatError(f"{node} is present but its left sibling is not")

            children.setdefault(node.parent, []).append(node)

        return cls(children, ends=ends)

    @property
    def is_finite(self) -> bool:
        return True

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[NodeWord]:
        return iter(self.nodes)

    def __contains__(self, u: object) -> bool:
        return u in self.index

    @property
    def height(self) -> int:
        return len(self.nodes[-1])

    def child_count(self, u: NodeWord) -> int:
        if u not in self._children:
            raise DomainError(f"{u} is not a node of the tree")

        return len(self._children[u])

    def children(self, u: NodeWord) -> list[NodeWord]:
        if u not in self._children:
            raise DomainError(f"{u} is not a node of the tree")

        return list(self._children[u])

    def contains(self, u: Sequence[int]) -> bool:
        return NodeWord(u) in self.index

    def is_finite_subtree(self, u: NodeWord) -> bool | None:
        if self.ends is not None:
            return not any(ray.passes_through(u) for ray in self.ends)

        return True

    def subtree_size(self, u: NodeWord) -> int | None:
        return self._sizes[u]

    def level_size(self, depth: int) -> int | None:
        return sum(1 for node in self.nodes if len(node) == depth)

    def leaves(self) -> list[NodeWord]:
        return [node for node in self.nodes if not self._children[node]]

    def subtree(self, v: NodeWord) -> FiniteTree:
        """T_v relabeled with v as the root"""
        cut = len(v)
        children = {
            NodeWord(node[cut:]): [NodeWord(kid[cut:]) for kid in self._children[node]]
            for node in self.descendants(v)
        }

        return FiniteTree(children)

    def counts(self) -> list[int]:
        return [len(self._children[node]) for node in self.nodes]

    def describe(self) -> dict[str, Any]:
        result: dict[str, Any] = {"type": "finite", "children": self.counts()}

        if self.ends is not None:
            result["ends"] = [ray.to_dict() for ray in self.ends]

        return result


class LazyTree(TreeSource):
    """A tree given by a pure function from node words to child counts"""

    def __init__(
        self,
        generator: Callable[[NodeWord], int],
        *,
        name: str = "lazy",
        ends: Sequence[Ray] | None = None,
        uncountable_ends: bool = False,
        leafless: bool | None = None,
        finite_subtree: Callable[[NodeWord], bool | None] | None = None,
        level_size: Callable[[int], int] | None = None,
        params: Mapping[str, Any] | None = None,
    ):
        self._generator = generator
        self._finite_subtree = finite_subtree
        self._level_size = level_size
        self._memo: dict[NodeWord, int] = {}
        self._lock = threading.Lock()

        self.name = name
        self.ends = tuple(ends) if ends is not None else None
        self.uncountable_ends = uncountable_ends
        self.leafless = leafless
        self.params = dict(params or {})

    def child_count(self, u: NodeWord) -> int:
        with self._lock:
            cached = self._memo.get(u)

        if cached is not None:
            return cached

        count = self._generator(u)

        if not isinstance(count, int) or count < 0:
            raise DomainError(f"Generator returned {count!r} children for {u}")

        with self._lock:
            self._memo.setdefault(u, count)

        return count

    def is_finite_subtree(self, u: NodeWord) -> bool | None:
        if self._finite_subtree is not None:
            result = self._finite_subtree(u)

            if result is not None:
                return result

        return super().is_finite_subtree(u)

    def level_size(self, depth: int) -> int | None:
        if self._level_size is None:
            return None

        return self._level_size(depth)

    def describe(self) -> dict[str, Any]:
        result: dict[str, Any] = {"type": "lazy", "family": self.name, **self.params}

        if self.ends is not None:
            result["ends"] = [ray.to_dict() for ray in self.ends]

        return result


def complete_tree(arity: int) -> TreeSource:
    """Every node has `arity` children"""
    if arity < 1:
        raise SpecFormatError("A complete tree needs arity >= 1")

    if arity == 1:
        return line_tree()

    return LazyTree(
        lambda u: arity,
        name=TreeFamily.COMPLETE,
        level_size=lambda depth: arity**depth,
        uncountable_ends=True,
        leafless=True,
        params={"arity": arity},
    )


def spine_tree(
    decorations: Sequence[FiniteTree] = (), *, name: str = TreeFamily.SPINE
) -> LazyTree:
    """A ray 0,00,000,... whose nodes all carry the same finite decorations

    Child 0 of a spine node continues the spine, child j >= 1 roots a copy
    of decorations[j-1].
    """
    decorations = tuple(decorations)

    def generator(u: NodeWord) -> int:
        branch = next((i for i, letter in enumerate(u) if letter != 0), None)

        if branch is None:
            return 1 + len(decorations)

        if u[branch] > len(decorations):
            raise DomainError(f"{u} is not a node of the {name} tree")

        decoration = decorations[u[branch] - 1]
        inner = NodeWord(u[branch + 1 :])

        if inner not in decoration:
            raise DomainError(f"{u} is not a node of the {name} tree")

        return decoration.child_count(inner)

    def finite_subtree(u: NodeWord) -> bool:
        return any(letter != 0 for letter in u)

    def level_size(depth: int) -> int:
        # one spine node plus the decoration levels hanging above this depth
        return 1 + sum(
            decoration.level_size(depth - attached - 1)
            for attached in range(depth)
            for decoration in decorations
        )

    params: dict[str, Any] = {}

    if decorations and name == TreeFamily.SPINE:
        params["decorations"] = [decoration.counts() for decoration in decorations]

    return LazyTree(
        generator,
        name=name,
        ends=(Ray((), (0,)),),
        leafless=not decorations,
        finite_subtree=finite_subtree,
        level_size=level_size,
        params=params,
    )


def line_tree() -> LazyTree:
    return spine_tree((), name=TreeFamily.LINE)


def comb_tree(arity: int) -> LazyTree:
    """Full arity-ary tree with a single end: spine nodes carry arity−1 leaves"""
    if arity < 2:
        raise SpecFormatError("A comb needs arity >= 2")

    leaf = FiniteTree.from_counts([0])
    tree = spine_tree([leaf] * (arity - 1), name=TreeFamily.COMB)
    tree.params = {"arity": arity}

    return tree


def rays_tree(count: int, labels: Sequence[str] | None = None) -> LazyTree:
    """`count` infinite rays glued at the root; count=2 is ℤ seen from 0"""
    if count < 1:
        raise SpecFormatError("Need at least one ray")

    if labels is None:
        labels = ["P+", "P-"] if count == 2 else [f"ray{i}" for i in range(count)]

    rays = tuple(Ray((i,), (0,), labels[i]) for i in range(count))

    return LazyTree(
        lambda u: count if not u else 1,
        name=TreeFamily.RAYS,
        level_size=lambda depth: count if depth else 1,
        ends=rays,
        leafless=True,
        params={"count": count},
    )


@dataclass(frozen=True)
class Truncation:
    """The nodes of depth <= height_bound, breadth-first"""

    source: TreeSource
    height_bound: int
    nodes: tuple[NodeWord, ...]
    index: Mapping[NodeWord, int]

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[NodeWord]:
        return iter(self.nodes)

    def __contains__(self, u: object) -> bool:
        return u in self.index

    def children(self, u: NodeWord) -> list[NodeWord]:
        return [kid for kid in self.source.children(u) if kid in self.index]

    def level(self, depth: int) -> list[NodeWord]:
        return [node for node in self.nodes if len(node) == depth]

    @classmethod
    def from_nodes(cls, source: TreeSource, nodes: Iterable[Sequence[int]]) -> Truncation:
        ordered = bfs_sorted(set(NodeWord(node) for node in nodes))

        if not ordered or not ordered[0].is_root:
            raise DomainError("A truncation must contain the root")

        present = set(ordered)

        for node in ordered[1:]:
            if node.parent not in present:
                raise DomainError(f"{node} is present but its parent is not")

        return cls(
            source,
            len(ordered[-1]),
            tuple(ordered),
            {node: i for i, node in enumerate(ordered)},
        )


def truncate(source: TreeSource, h: int, cap: int = DEFAULT_NODE_CAP) -> Truncation:
    """All nodes of depth <= h"""
    if h < 0:
        raise DomainError("Truncation height must be non-negative")

    nodes = tuple(source.descendants(ROOT, max_depth=h, cap=cap))
    _LOGGER.debug("Truncated %s at height %d: %d nodes", source.name, h, len(nodes))

    return Truncation(source, h, nodes, {node: i for i, node in enumerate(nodes)})


def subtree_truncation(
    source: TreeSource, i: NodeWord, h: int, cap: int = DEFAULT_NODE_CAP
) -> tuple[NodeWord, ...]:
    """T_{i,<h}: the nodes of T_i with depth < h"""
    if len(i) >= h:
        return ()

    return tuple(source.descendants(i, max_depth=h - 1, cap=cap))


def detect_ends(
    source: TreeSource,
    probe_depth: int = DEFAULT_PROBE_DEPTH,
    cap: int = DEFAULT_NODE_CAP,
) -> EndDescription | Undetermined:
    """Declared ends when annotated, otherwise a best-effort probe"""
    if source.ends is not None:
        return describe_ends(source.ends)

    if source.is_finite:
        return EndDescription((), ())

    if source.uncountable_ends:
        return Undetermined(probe_depth, (), "branching everywhere")

    levels: list[list[NodeWord]] = [[ROOT]]

    for _ in range(probe_depth):
        levels.append([kid for node in levels[-1] for kid in source.children(node)])

        if sum(len(level) for level in levels) > cap:
            raise ResourceLimitError(f"Probe exceeded {cap} nodes", cap=cap)

    survivors = [set(levels[-1])]

    for depth in range(probe_depth, 0, -1):
        survivors.insert(0, {node.parent for node in survivors[0]})

    if not survivors[-1]:
        return EndDescription((), (), probed=True)

    if len(survivors[-1]) == len(survivors[probe_depth // 2]):
        rays = [Ray(tuple(node)) for node in bfs_sorted(survivors[-1])]
        _LOGGER.debug("Probe found %d candidate ends", len(rays))

        return describe_ends(rays, probed=True)

    return Undetermined(
        probe_depth,
        tuple(bfs_sorted(survivors[-1])),
        "branching persists at the probe frontier",
    )
