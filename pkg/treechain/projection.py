"""Kernel projections onto subtrees and ends, and time reversal"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Sequence
from typing import Any

from .arith import Number, format_number
from .const import DEFAULT_TOL
from .errors import AnnotationError, DomainError
from .invariant import MeasureLike, as_lookup, balance_residual
from .kernel import AldKernel, AudKernel, ExplicitKernel
from .stream import UniformStream
from .tree import ROOT, FiniteTree, NodeWord, Ray, TreeSource, Truncation

_LOGGER = logging.getLogger(__name__)


class SubtreeView(TreeSource):
    """A prefix-closed part of a tree; other nodes map to their closest kept ancestor

    Node words are those of the parent tree, so kept children need not be
    numbered contiguously.
    """

    def __init__(
        self,
        parent: TreeSource,
        keep: Callable[[NodeWord], bool],
        *,
        name: str,
        finite: bool = False,
        finite_subtree: Callable[[NodeWord], bool | None] | None = None,
        ends: Sequence[Ray] | None = None,
        leafless: bool | None = None,
    ):
        self.parent = parent
        self._keep = keep
        self._finite = finite
        self._finite_subtree = finite_subtree
        self.name = name
        self.ends = tuple(ends) if ends is not None else None
        self.leafless = leafless

    @property
    def is_finite(self) -> bool:
        return self._finite

    def keeps(self, u: NodeWord) -> bool:
        return self._keep(u)

    def children(self, u: NodeWord) -> list[NodeWord]:
        return [child for child in self.parent.children(u) if self._keep(child)]

    def child_count(self, u: NodeWord) -> int:
        return len(self.children(u))

    def contains(self, u: Sequence[int]) -> bool:
        u = NodeWord(u)

        return all(self._keep(node) for node in u.ancestors()) and self.parent.contains(u)

    def is_finite_subtree(self, u: NodeWord) -> bool | None:
        if self._finite:
            return True

        if self._finite_subtree is not None:
            return self._finite_subtree(u)

        return super().is_finite_subtree(u)

    def project(self, w: NodeWord) -> NodeWord:
        """℘(w): the deepest kept prefix of w"""
        node = ROOT

        for depth in range(1, len(w) + 1):
            candidate = w.prefix(depth)

            if not self._keep(candidate):
                break

            node = candidate

        return node

    def describe(self) -> dict[str, Any]:
        return {"type": "view", "family": self.name, "parent": self.parent.describe()}


class ProjectedKernel(AudKernel):
    """U redirected onto a view: mass below v that leaves the view lands on v"""

    def __init__(self, base: AudKernel, view: SubtreeView):
        super().__init__(view)
        self.base = base
        self.view = view
        self.family = base.family
        self.is_random_walk = base.is_random_walk

    @property
    def is_exact(self) -> bool:
        return self.base.is_exact

    def _require(self, u: NodeWord):
        if not self.view.keeps(u):
            raise DomainError(f"{u} is not part of the {self.view.name} view")

    def parent_weight(self, u: NodeWord) -> Number:
        self._require(u)

        return self.base.parent_weight(u)

    def subtree_mass(self, u: NodeWord, v: NodeWord) -> Number:
        self._require(u)

        return self.base.subtree_mass(u, v)

    def sample_step(self, u: NodeWord, stream: UniformStream) -> NodeWord:
        return self.view.project(self.base.sample_step(u, stream))

    def describe(self) -> dict[str, Any]:
        return {"family": "projection", "view": self.view.name, "base": self.base.describe()}


def project_subtree(
    kernel: AudKernel, t: Truncation | Iterable[Sequence[int]]
) -> ProjectedKernel:
    """U^t on a prefix-closed node set t containing the root"""
    nodes = set(t.nodes if isinstance(t, Truncation) else (NodeWord(u) for u in t))

    if ROOT not in nodes:
        raise DomainError("The projection set must contain the root")

    for u in nodes:
        if not u.is_root and u.parent not in nodes:
            raise DomainError(f"{u} is kept but its parent is not")

    view = SubtreeView(kernel.source, nodes.__contains__, name="subtree", finite=True)

    return ProjectedKernel(kernel, view)


def end_view(source: TreeSource, end: Ray) -> SubtreeView:
    """T^p: the ray plus the finite subtrees hanging off it"""

    def keep(w: NodeWord) -> bool:
        branch = next(
            (depth for depth in range(len(w)) if not end.passes_through(w.prefix(depth + 1))),
            None,
        )

        if branch is None:
            return True

        finite = source.is_finite_subtree(w.prefix(branch + 1))

        if finite is None:
            raise AnnotationError(
                f"Cannot decide whether the subtree at {w.prefix(branch + 1)} is finite"
            )

        return finite

    return SubtreeView(
        source,
        keep,
        name=f"end {end.name}",
        finite_subtree=lambda u: not end.passes_through(u),
        ends=(end,),
    )


def project_end(
    kernel: AudKernel, end: Ray, source: TreeSource | None = None
) -> ProjectedKernel:
    """U^p for a declared end p"""
    source = source if source is not None else kernel.source

    depth = len(end.prefix) + len(end.period)

    if not source.contains(end.node(depth)):
        raise DomainError(f"{end.name} does not follow the tree")

    _LOGGER.debug("Projecting %s onto end %s", kernel.family.value, end.name)

    return ProjectedKernel(kernel, end_view(source, end))


def prune_finite_subtrees(
    kernel: AudKernel, source: TreeSource | None = None
) -> ProjectedKernel:
    """U^∞ on the nodes that have infinitely many descendants"""
    source = source if source is not None else kernel.source

    def keep(w: NodeWord) -> bool:
        finite = source.is_finite_subtree(w)

        if finite is None:
            raise AnnotationError(f"Cannot decide whether the subtree at {w} is finite")

        return not finite

    if not keep(ROOT):
        raise DomainError("The tree is finite; its leafless skeleton is empty")

    view = SubtreeView(
        source,
        keep,
        name="skeleton",
        finite_subtree=lambda u: False,
        ends=source.ends,
        leafless=True,
    )

    return ProjectedKernel(kernel, view)


class ReversedKernel(AldKernel):
    """D_{v,u} = π_u U_{u,v} / π_v"""

    def __init__(self, base: AudKernel, pi: MeasureLike):
        super().__init__(base.source)
        self.base = base
        self.pi = as_lookup(pi)

    @property
    def is_exact(self) -> bool:
        return self.base.is_exact

    def child_weight(self, u: NodeWord, child: NodeWord) -> Number:
        return self.pi(child) * self.base.parent_weight(child) / self.pi(u)

    def ancestor_weight(self, u: NodeWord, ancestor: NodeWord) -> Number:
        return self.pi(ancestor) * self.base.point_weight(ancestor, u) / self.pi(u)

    def dense(self, nodes: Sequence[NodeWord]) -> list[list[Number]]:
        return [[self.point_weight(u, v) for v in nodes] for u in nodes]


def _check_invariant(kernel: AudKernel, pi: MeasureLike, nodes: Iterable[NodeWord], tol: float):
    lookup = as_lookup(pi)

    for u in nodes:
        if not lookup(u) > 0:
            raise DomainError(f"Measure is not positive at {u}", node=u)

        residual = balance_residual(kernel, lookup, u)

        if residual > tol:
            raise DomainError(
                f"Measure is not invariant at {u} (residual {format_number(residual)})",
                node=u,
            )


def reverse(
    kernel: AudKernel,
    pi: MeasureLike,
    trunc: Truncation | None = None,
    tol: float = DEFAULT_TOL,
) -> ReversedKernel:
    """Time reversal of an AUD kernel with respect to an invariant measure"""
    if trunc is None:
        if not isinstance(kernel.source, FiniteTree):
            raise DomainError("Reversing on an infinite tree needs a truncation to check")

        nodes: Iterable[NodeWord] = kernel.source.nodes
    else:
        # balance at the frontier needs values below it
        nodes = [u for u in trunc.nodes if len(u) < trunc.height_bound] or [ROOT]

    _check_invariant(kernel, pi, nodes, tol)

    return ReversedKernel(kernel, pi)


def reverse_ald(kernel: AldKernel, pi: MeasureLike) -> ExplicitKernel:
    """U_{u,v} = π_v D_{v,u} / π_u, on finite trees"""
    tree = kernel.source

    if not isinstance(tree, FiniteTree):
        raise DomainError("Reversing an ALD kernel needs a finite tree")

    lookup = as_lookup(pi)
    rows: dict[NodeWord, dict[NodeWord, Number]] = {u: {} for u in tree.nodes}

    for v in tree.nodes:
        for u in tree.nodes:
            weight = kernel.point_weight(v, u)

            if weight != 0:
                rows[u][v] = lookup(v) * weight / lookup(u)

    return ExplicitKernel(tree, rows)
