"""h-invariant measures and left eigenvectors of AUD kernels"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Union

from .arith import (
    Number,
    determinant,
    eigen_multiplicity,
    format_number,
    is_exact,
    matrix_is_exact,
    minor,
    shifted,
)
from .const import DEFAULT_LEVEL_CAP, DEFAULT_PROBE_DEPTH
from .errors import (
    AnnotationError,
    DomainError,
    MultipleEigenvalueError,
    NotAnEigenvalueError,
    ResourceLimitError,
)
from .jobs import run_jobs
from .kernel import AudKernel
from .tree import ROOT, NodeWord, TreeSource, Truncation, Undetermined, detect_ends

_LOGGER = logging.getLogger(__name__)

MeasureLike = Union[Mapping[NodeWord, Number], Callable[[NodeWord], Number]]


def as_lookup(mu: MeasureLike) -> Callable[[NodeWord], Number]:
    if callable(mu):
        return mu

    def lookup(u: NodeWord) -> Number:
        try:
            return mu[u]
        except KeyError as exc:
            raise DomainError(f"Measure is not defined at {u}") from exc

    return lookup


@dataclass(frozen=True)
class Measure(Mapping[NodeWord, Number]):
    """Node values; non-negative with a positive root unless signed"""

    entries: Mapping[NodeWord, Number]
    signed: bool = False

    def __post_init__(self):
        if self.signed:
            return

        if not self.entries.get(ROOT, 0) > 0:
            raise DomainError("A measure needs a positive value at the root")

        for node, value in self.entries.items():
            if value < 0:
                raise DomainError(f"Negative measure value at {node}")

    def __getitem__(self, u: NodeWord) -> Number:
        return self.entries[u]

    def __iter__(self) -> Iterator[NodeWord]:
        return iter(sorted(self.entries, key=NodeWord.sort_key))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def root(self) -> Number:
        return self.entries[ROOT]

    def total(self) -> Number:
        values = list(self.entries.values())

        return sum(values[1:], values[0])

    def scaled(self, factor: Number) -> Measure:
        return Measure({u: value * factor for u, value in self.entries.items()}, self.signed)

    def normalized(self) -> Measure:
        """Total mass one"""
        return self.scaled(1 / self.total())

    def rows(self) -> list[tuple[NodeWord, int, Number]]:
        return [(u, len(u), self.entries[u]) for u in self]

    def to_dict(self) -> dict[str, str]:
        return {str(u): format_number(self.entries[u]) for u in self}


@dataclass(frozen=True)
class BranchMatrix:
    """^uU on the ancestral path [[∅, u]]"""

    node: NodeWord
    path: tuple[NodeWord, ...]
    entries: tuple[tuple[Number, ...], ...]

    def as_list(self) -> list[list[Number]]:
        return [list(row) for row in self.entries]

    def row_sums(self) -> list[Number]:
        return [sum(row[1:], row[0]) for row in self.entries]


@dataclass(frozen=True)
class EigenReport:
    """A left eigenvector with the diagnostics of its construction"""

    lam: Number
    vector: tuple[Number, ...]
    multiplicity: int
    pivot: int | None = None
    residual: float = 0.0
    condition: float | None = field(default=None, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda": format_number(self.lam),
            "vector": [format_number(value) for value in self.vector],
            "multiplicity": self.multiplicity,
            "pivot": self.pivot,
            "residual": self.residual,
        }


def branch_matrix(kernel: AudKernel, u: NodeWord) -> BranchMatrix:
    if u.is_root:
        raise DomainError("The branch matrix is defined for u != ∅")

    path = tuple(u.ancestors())
    size = len(path)
    zero = kernel.zero
    rows: list[tuple[Number, ...]] = []

    for i, a in enumerate(path[:-1]):
        row = [zero] * size

        if i > 0:
            # b = p(a): U_{a,T_{p(a)}} − U_{a,T_a} is the parent weight
            row[i - 1] = kernel.parent_weight(a)

        for j in range(i, size - 1):
            row[j] = kernel.subtree_mass(a, path[j]) - kernel.subtree_mass(a, path[j + 1])

        row[size - 1] = kernel.subtree_mass(a, u)
        rows.append(tuple(row))

    last = [zero] * size
    last[size - 2] = kernel.parent_weight(u)
    last[size - 1] = kernel.one - kernel.parent_weight(u)
    rows.append(tuple(last))

    return BranchMatrix(u, path, tuple(rows))


def _path_denominator(kernel: AudKernel, u: NodeWord) -> Number:
    product = kernel.one

    for v in u.ancestors()[1:]:
        weight = kernel.parent_weight(v)

        if weight == 0:
            raise DomainError(f"Zero parent weight at {v}; the kernel is not irreducible", node=v)

        product *= weight

    return product


def h_invariant_det(
    kernel: AudKernel, u: NodeWord, root_value: Number = 1, lam: Number = 1
) -> Number:
    """π(u) = root_value · det((λId − ^uU)^(u)) / ∏_{v∈]∅,u]} U_{v,p(v)}"""
    if u.is_root:
        return root_value * kernel.one

    denominator = _path_denominator(kernel, u)
    matrix = branch_matrix(kernel, u).as_list()
    size = len(matrix)
    result = determinant(minor(shifted(matrix, lam), [size - 1], [size - 1]))

    if result.condition is not None:
        _LOGGER.debug("Branch determinant at %s: cond=%.3g", u, result.condition)

    return root_value * result.value / denominator


def h_invariant_det_many(
    kernel: AudKernel,
    nodes: Iterable[NodeWord],
    root_value: Number = 1,
    jobs: int = 1,
) -> Measure:
    """Independent branch determinants for many nodes"""
    nodes = [NodeWord(u) for u in nodes]
    values = run_jobs(
        [lambda u=u: h_invariant_det(kernel, u, root_value) for u in nodes], jobs
    )
    entries = dict(zip(nodes, values))
    entries.setdefault(ROOT, root_value * kernel.one)

    return Measure(entries)


def ancestral_closure(targets: Iterable[Sequence[int]]) -> list[NodeWord]:
    closure: set[NodeWord] = set()

    for target in targets:
        closure.update(NodeWord(target).ancestors())

    if not closure:
        closure.add(ROOT)

    return sorted(closure, key=NodeWord.sort_key)


def _add_leaf(kernel: AudKernel, values: Mapping[NodeWord, Number], u: NodeWord) -> Number:
    weight = kernel.parent_weight(u)

    if weight == 0:
        raise DomainError(f"Zero parent weight at {u}; the kernel is not irreducible", node=u)

    total = kernel.zero

    for v in u.ancestors()[:-1]:
        total += values[v] * kernel.subtree_mass(v, u)

    return total / weight


def h_invariant_leaf_addition(
    kernel: AudKernel,
    targets: Truncation | Iterable[Sequence[int]],
    root_value: Number = 1,
) -> Measure:
    """π on the ancestral closure of targets, one leaf at a time in breadth-first order"""
    nodes = ancestral_closure(targets.nodes if isinstance(targets, Truncation) else targets)
    values: dict[NodeWord, Number] = {ROOT: root_value * kernel.one}

    for u in nodes[1:]:
        values[u] = _add_leaf(kernel, values, u)

    return Measure(values)


def level_measures(
    kernel: AudKernel, depth: int, cap: int = DEFAULT_LEVEL_CAP, root_value: Number = 1
) -> Iterator[dict[NodeWord, Number]]:
    """Per-level values of π by breadth-first leaf addition, down to a depth"""
    values: dict[NodeWord, Number] = {ROOT: root_value * kernel.one}
    level = [ROOT]
    yield {ROOT: values[ROOT]}

    for k in range(1, depth + 1):
        level = [child for node in level for child in kernel.source.children(node)]

        if len(level) > cap:
            raise ResourceLimitError(
                f"Level {k} has more than {cap} nodes", cap=cap, depth=k
            )

        current = {}

        for u in level:
            values[u] = current[u] = _add_leaf(kernel, values, u)

        yield current


def rw_invariant(kernel: AudKernel, u: NodeWord, root_value: Number = 1) -> Number:
    """Edge-ratio product along [[∅, u]] for random walks"""
    if not kernel.is_random_walk:
        raise DomainError("The product formula needs a random-walk kernel")

    value = root_value * kernel.one

    for node in u.ancestors()[1:]:
        back = kernel.parent_weight(node)
        forth = kernel.point_weight(node.parent, node)

        if back == 0 or forth == 0:
            raise DomainError(f"Zero edge weight between {node.parent} and {node}", node=node)

        value = value * forth / back

    return value


def balance_residual(
    kernel: AudKernel, mu: MeasureLike, u: NodeWord, lam: Number = 1
) -> Number:
    """|λ mu(u) − Σ_{v∈[[∅,u]]} mu(v)U_{v,u} − Σ_{c∈c(u)} mu(c)U_{c,u}|"""
    lookup = as_lookup(mu)
    flow = lam * lookup(u)

    for v in u.ancestors():
        flow -= lookup(v) * kernel.point_weight(v, u)

    for child in kernel.source.children(u):
        flow -= lookup(child) * kernel.parent_weight(child)

    return abs(flow)


def lambda_eigenvector_branch(
    kernel: AudKernel, lam: Number, u: NodeWord, root_value: Number = 1
) -> Number:
    """π^(λ)(u) by the branch formula, on trees without leaves"""
    if kernel.source.leafless is not True:
        raise DomainError(
            "The branch formula gives eigenvectors only on trees declared leafless"
        )

    return h_invariant_det(kernel, u, root_value, lam)


def _replace_column(matrix: Sequence[Sequence[Number]], k: int) -> list[list[Number]]:
    """Column k becomes minus the sum of the others, so rows sum to zero"""
    result = [list(row) for row in matrix]

    for row in result:
        row[k] = -sum((value for j, value in enumerate(row) if j != k), row[k] - row[k])

    return result


def _left_residual(
    matrix: Sequence[Sequence[Number]], vector: Sequence[Number], lam: Number
) -> float:
    size = len(matrix)
    worst = 0.0

    for j in range(size):
        total = lam * vector[j] - sum(vector[i] * matrix[i][j] for i in range(size))
        worst = max(worst, abs(float(total)))

    return worst


def lambda_eigenvector_finite(
    matrix: Sequence[Sequence[Number]], lam: Number, tol: float = 1e-9
) -> EigenReport:
    """Left λ-eigenvector of a finite matrix by principal cofactors

    λ must be a simple eigenvalue. The column replaced to make λId − M a
    Laplacian is tried last-first, then in index order, until the cofactor
    vector is a non-zero eigenvector.
    """
    size = len(matrix)
    multiplicity = eigen_multiplicity(matrix, lam)

    if multiplicity == 0:
        raise NotAnEigenvalueError(f"{format_number(lam)} is not an eigenvalue", lam=lam)

    if multiplicity > 1:
        raise MultipleEigenvalueError(
            f"{format_number(lam)} has multiplicity {multiplicity}",
            lam=lam,
            multiplicity=multiplicity,
        )

    exact = matrix_is_exact(matrix) and is_exact(lam)
    base = shifted(matrix, lam)

    for pivot in [size - 1, *range(size - 1)]:
        laplacian = _replace_column(base, pivot)
        vector: list[Number] = []
        worst_condition = None

        for i in range(size):
            result = determinant(minor(laplacian, [i], [i]))
            vector.append(result.value)

            if result.condition is not None:
                worst_condition = max(worst_condition or 0.0, result.condition)

        if all((value == 0) if exact else abs(value) <= tol for value in vector):
            _LOGGER.debug("Cofactors vanish with pivot column %d", pivot)
            continue

        residual = _left_residual(matrix, vector, lam)
        scale = max(abs(float(value)) for value in vector)

        if (residual == 0) if exact else residual <= tol * max(scale, 1.0):
            return EigenReport(
                lam, tuple(vector), multiplicity, pivot, residual, worst_condition
            )

    raise NotAnEigenvalueError(
        f"No cofactor eigenvector found for {format_number(lam)}", lam=lam
    )


def eigenspace_dimension(
    source: TreeSource, probe_depth: int = DEFAULT_PROBE_DEPTH
) -> int | float:
    """Q(T) = 1 + Σ_{u∈P(T)} (|c_P(u)| − 1); math.inf for uncountably many ends"""
    if source.uncountable_ends:
        return math.inf

    ends = detect_ends(source, probe_depth)

    if isinstance(ends, Undetermined):
        raise AnnotationError(f"End structure is undetermined: {ends.reason}")

    return 1 + ends.excess_branching()


def integer_line_measure(x: Number) -> Callable[[NodeWord], Number]:
    """ρ'_j = 1 − (1 − 2^j)x for the biased walk on ℤ seen as two rays"""

    def measure(u: NodeWord) -> Number:
        j = len(u) if not u or u[0] == 0 else -len(u)
        power = Fraction(2) ** j if is_exact(x) else 2.0**j

        return 1 - (1 - power) * x

    return measure


def binary_split_measure(x: Number) -> Callable[[NodeWord], Number]:
    """Invariant for the simple walk on the binary tree: a_k under 0, b_k under 1"""

    def measure(u: NodeWord) -> Number:
        if u.is_root:
            return x - x + 1

        k = len(u)
        weight = Fraction(2**k - 1, 2 ** (k - 1)) if is_exact(x) else (2**k - 1) / 2 ** (k - 1)

        return 1 + weight * x if u[0] == 0 else 1 - weight * x

    return measure
