"""Brute-force ground truth: dense solves, spanning trees, path sums, simulation

Nothing here calls into the tree recursions it is meant to check.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .arith import Number, determinant, format_number, is_exact, matrix_is_exact, minor, solve
from .const import MAX_ENUMERATION_LENGTH, MAX_SPANNING_ENUMERATION
from .errors import DomainError, OracleMismatchError, ResourceLimitError
from .invariant import Measure
from .kernel import AudKernel
from .series import PowerSeries
from .stream import UniformStream
from .tree import ROOT, FiniteTree, NodeWord, Truncation

_LOGGER = logging.getLogger(__name__)

MAX_SPANNING_CANDIDATES = 1_000_000


@dataclass(frozen=True)
class DenseChain:
    """A finite transition matrix with node labels"""

    nodes: tuple[NodeWord, ...]
    matrix: tuple[tuple[Number, ...], ...]
    defective: bool = False

    def __post_init__(self):
        size = len(self.nodes)

        if len(self.matrix) != size or any(len(row) != size for row in self.matrix):
            raise DomainError("Matrix shape does not match the node list")

        if self.defective:
            return

        exact = matrix_is_exact(self.matrix)

        for node, row in zip(self.nodes, self.matrix):
            total = sum(row)

            if (total != 1) if exact else abs(total - 1) > 1e-9:
                raise DomainError(f"Row {node} sums to {format_number(total)}")

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[Number]], defective: bool = False) -> DenseChain:
        """State 0 is labelled as the root, state i as the word (i,)"""
        nodes = (ROOT,) + tuple(NodeWord((i,)) for i in range(1, len(matrix)))

        return cls(nodes, tuple(tuple(row) for row in matrix), defective)

    @classmethod
    def from_kernel(
        cls,
        kernel: AudKernel,
        trunc: Truncation | Iterable[Sequence[int]] | None = None,
        defective: bool = False,
    ) -> DenseChain:
        """U restricted to a truncation or a node list, or to the whole finite tree"""
        if trunc is None:
            if not isinstance(kernel.source, FiniteTree):
                raise DomainError("A dense chain needs a finite tree or a truncation")

            nodes = tuple(kernel.source.nodes)
        elif isinstance(trunc, Truncation):
            nodes = tuple(trunc.nodes)
        else:
            nodes = tuple(NodeWord(node) for node in trunc)

        matrix = tuple(
            tuple(kernel.point_weight(u, v) for v in nodes) for u in nodes
        )

        return cls(nodes, matrix, defective)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def index(self, node: NodeWord | int) -> int:
        if isinstance(node, int):
            return node

        return self.nodes.index(NodeWord(node))


def is_irreducible(chain: DenseChain) -> bool:
    """Every state reaches every other through positive entries"""
    size = chain.size

    def reach(forward: bool) -> set[int]:
        seen = {0}
        stack = [0]

        while stack:
            i = stack.pop()

            for j in range(size):
                weight = chain.matrix[i][j] if forward else chain.matrix[j][i]

                if weight != 0 and j not in seen:
                    seen.add(j)
                    stack.append(j)

        return seen

    return len(reach(True)) == size and len(reach(False)) == size


def _close(a: Number, b: Number, tol: float) -> bool:
    if is_exact(a) and is_exact(b):
        return a == b

    return abs(float(a) - float(b)) <= tol


def stationary_dense(chain: DenseChain, tol: float = 1e-9) -> Measure:
    """π(r) ∝ det(Id − K^(r)), checked against a direct solve of π(Id − K) = 0"""
    if not is_irreducible(chain):
        raise DomainError("The chain is reducible")

    size = chain.size
    laplacian = [
        [(1 if i == j else 0) - chain.matrix[i][j] for j in range(size)] for i in range(size)
    ]
    cofactors = [determinant(minor(laplacian, [r], [r])).value for r in range(size)]
    total = sum(cofactors[1:], cofactors[0])
    kirchhoff = [value / total for value in cofactors]

    # transpose, then trade the last balance equation for the normalization
    system = [[laplacian[j][i] for j in range(size)] for i in range(size)]
    system[-1] = [1] * size
    rhs = [0] * (size - 1) + [1]
    direct = solve(system, rhs)

    for node, first, second in zip(chain.nodes, kirchhoff, direct):
        if not _close(first, second, tol):
            raise OracleMismatchError(
                f"Stationary routes disagree at {node}: "
                f"{format_number(first)} vs {format_number(second)}"
            )

    return Measure(dict(zip(chain.nodes, kirchhoff)))


def laplacian(weights: Sequence[Sequence[Number]]) -> list[list[Number]]:
    """Out-degree Laplacian: row sums on the diagonal, −w off it"""
    size = len(weights)

    return [
        [
            sum(weights[i][k] for k in range(size) if k != i) if i == j else -weights[i][j]
            for j in range(size)
        ]
        for i in range(size)
    ]


def _enumerate_spanning(weights: Sequence[Sequence[Number]], r: int) -> Number:
    """Σ over spanning trees oriented toward r of the product of their edge weights"""
    size = len(weights)
    others = [i for i in range(size) if i != r]
    choices = [[j for j in range(size) if j != i and weights[i][j] != 0] for i in others]
    total: Number = 0

    for targets in itertools.product(*choices):
        parent = dict(zip(others, targets))

        if all(_reaches_root(parent, i, r) for i in others):
            product: Number = 1

            for i, j in parent.items():
                product *= weights[i][j]

            total += product

    return total


def _reaches_root(parent: dict[int, int], start: int, root: int) -> bool:
    node = start

    for _ in range(len(parent) + 1):
        if node == root:
            return True

        node = parent[node]

    return node == root


def spanning_tree_weight(
    weights: Sequence[Sequence[Number]], r: int, check: bool = True
) -> Number:
    """det(Laplacian(w)^(r)), cross-checked by enumeration on small graphs"""
    value = determinant(minor(laplacian(weights), [r], [r])).value
    size = len(weights)

    if not check or size > MAX_SPANNING_ENUMERATION:
        return value

    candidates = math.prod(
        max(1, sum(1 for j in range(size) if j != i and weights[i][j] != 0))
        for i in range(size)
        if i != r
    )

    if candidates > MAX_SPANNING_CANDIDATES:
        _LOGGER.debug("Skipping spanning-tree enumeration: %d candidates", candidates)
        return value

    enumerated = _enumerate_spanning(weights, r)

    if not _close(value, enumerated, 1e-9 * max(1.0, abs(float(value)))):
        raise OracleMismatchError(
            f"Matrix-tree value {format_number(value)} differs from "
            f"enumeration {format_number(enumerated)}"
        )

    return value


def enumerate_paths(
    chain: DenseChain,
    start: NodeWord | int,
    end: NodeWord | int,
    max_length: int,
    *,
    forbidden: Iterable[NodeWord | int] = (),
    first_hit: bool = False,
    x: Number | None = None,
    strategy: str = "dfs",
) -> PowerSeries | Number:
    """Σ over constrained paths start → end of W(p) x^{|p|}

    Positions after the start avoid `forbidden`; with `first_hit` the end is
    not visited before the last step. Without x the coefficients per length
    come back as a power series.
    """
    source = chain.index(start)
    target = chain.index(end)
    banned = {chain.index(node) for node in forbidden}

    if strategy == "dfs":
        if max_length > MAX_ENUMERATION_LENGTH:
            raise ResourceLimitError(
                f"Path length {max_length} exceeds the enumeration guard",
                cap=MAX_ENUMERATION_LENGTH,
            )

        coefficients = _paths_dfs(chain, source, target, max_length, banned, first_hit)
    elif strategy == "layered":
        coefficients = _paths_layered(chain, source, target, max_length, banned, first_hit)
    else:
        raise DomainError(f"Unknown enumeration strategy {strategy!r}")

    series = PowerSeries(coefficients, max_length)

    if x is None:
        return series

    return series.evaluate(x)


def _paths_dfs(
    chain: DenseChain,
    source: int,
    target: int,
    max_length: int,
    banned: set[int],
    first_hit: bool,
) -> list[Number]:
    exact = matrix_is_exact(chain.matrix)
    coefficients: list[Number] = [0] * (max_length + 1)
    successors = [
        [(j, weight) for j, weight in enumerate(row) if weight != 0] for row in chain.matrix
    ]

    def walk(node: int, length: int, weight: Number):
        if node == target and (length > 0 or not first_hit):
            coefficients[length] += weight

            if first_hit:
                return

        if length == max_length:
            return

        for nxt, step in successors[node]:
            if nxt in banned:
                continue

            walk(nxt, length + 1, weight * step)

    walk(source, 0, 1 if exact else 1.0)

    return coefficients


def _paths_layered(
    chain: DenseChain,
    source: int,
    target: int,
    max_length: int,
    banned: set[int],
    first_hit: bool,
) -> list[Number]:
    size = chain.size
    layer: list[Number] = [0] * size
    layer[source] = 1
    coefficients: list[Number] = [0] * (max_length + 1)

    for length in range(max_length + 1):
        if length > 0 or not first_hit:
            coefficients[length] = layer[target]

            if first_hit:
                layer[target] = 0

        if length == max_length:
            break

        following: list[Number] = [0] * size

        for i, mass in enumerate(layer):
            if mass == 0:
                continue

            for j, weight in enumerate(chain.matrix[i]):
                if weight != 0 and j not in banned:
                    following[j] += mass * weight

        layer = following

    return coefficients


@dataclass
class Simulation:
    """What one seeded trajectory saw"""

    start: NodeWord
    steps: int
    seed: int | None
    occupancy: Counter = field(default_factory=Counter)
    heights: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    first_return: int | None = None
    first_repeat: tuple[NodeWord, int, int] | None = None

    @property
    def drift(self) -> float:
        """Mean height increment per step"""
        return float(self.heights[-1] - self.heights[0]) / self.steps

    @property
    def drift_stderr(self) -> float:
        increments = np.diff(self.heights)

        return float(increments.std(ddof=1) / math.sqrt(len(increments)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "start": str(self.start),
            "steps": self.steps,
            "seed": self.seed,
            "first_return": self.first_return,
            "drift": self.drift,
            "drift_stderr": self.drift_stderr,
            "distinct_states": len(self.occupancy),
        }


def simulate(
    kernel: AudKernel,
    start: NodeWord,
    steps: int,
    seed: int | None | UniformStream = 0,
    track: Callable[[NodeWord], bool] | None = None,
) -> Simulation:
    """Run the kernel's own sampler; occupancy is kept for states passing `track`"""
    stream = seed if isinstance(seed, UniformStream) else UniformStream(seed)
    state = NodeWord(start)
    heights = np.empty(steps + 1, dtype=np.int64)
    heights[0] = len(state)
    result = Simulation(state, steps, stream.seed)
    first_seen = {state: 0}

    for t in range(1, steps + 1):
        state = kernel.sample_step(state, stream)
        heights[t] = len(state)

        if track is None or track(state):
            result.occupancy[state] += 1

        if result.first_return is None and state == result.start:
            result.first_return = t

        if result.first_repeat is None:
            if state in first_seen:
                result.first_repeat = (state, first_seen[state], t)
            else:
                first_seen[state] = t

    result.heights = heights

    return result


def hitting_frequency(
    kernel: AudKernel,
    start: NodeWord,
    hit: Callable[[NodeWord], bool],
    escape: Callable[[NodeWord], bool],
    runs: int,
    seed: int | None = 0,
    max_steps: int = 100_000,
) -> tuple[float, float]:
    """Monte Carlo P(hit before escape) with its standard error"""
    hits = 0

    for stream in UniformStream(seed).spawn(runs):
        state = NodeWord(start)

        for _ in range(max_steps):
            state = kernel.sample_step(state, stream)

            if hit(state):
                hits += 1
                break

            if escape(state):
                break

    p = hits / runs

    return p, math.sqrt(max(p * (1 - p), 0.0) / runs)


def stationary_residual(chain: DenseChain, pi: Sequence[Number]) -> float:
    """max_j |Σ_i π_i K_{i,j} − π_j|"""
    size = chain.size

    return max(
        abs(float(sum(pi[i] * chain.matrix[i][j] for i in range(size)) - pi[j]))
        for j in range(size)
    )


def stationary_numpy(chain: DenseChain) -> list[float]:
    """Float left eigenvector for eigenvalue 1"""
    matrix = np.array(chain.matrix, dtype=float)
    values, vectors = np.linalg.eig(matrix.T)
    k = int(np.argmin(np.abs(values - 1)))
    vector = np.real(vectors[:, k])

    return [float(value) for value in vector / vector.sum()]

