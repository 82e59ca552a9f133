"""Critical Galton-Watson trees seen from their spine, and walks on them"""

from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .arith import Number, format_number, is_exact, parse_number
from .classify import Verdict
from .const import (
    DEFAULT_EPS,
    DEFAULT_GRAFT_CAP,
    DEFAULT_MAX_RESAMPLES,
    Origin,
    Outcome,
)
from .errors import DomainError, ResourceLimitError, SpecFormatError
from .invariant import h_invariant_leaf_addition
from .jobs import run_jobs
from .kernel import DegreeHomogeneous
from .stream import UniformStream
from .tree import ROOT, FiniteTree, NodeWord, Ray, TreeSource

_LOGGER = logging.getLogger(__name__)


def _parse_pairs(text: str) -> dict[int, Number]:
    """"0:1/2,2:1/2" into {0: 1/2, 2: 1/2}"""
    result: dict[int, Number] = {}

    for item in text.split(","):
        item = item.strip()

        if not item:
            continue

        key, sep, value = item.partition(":")

        if not sep:
            raise SpecFormatError(f"Expected degree:value, got {item!r}")

        try:
            degree = int(key)
        except ValueError as exc:
            raise SpecFormatError(f"Bad degree in {item!r}") from exc

        if degree < 0:
            raise SpecFormatError(f"Bad degree in {item!r}")

        result[degree] = parse_number(value)

    return result


@dataclass(frozen=True)
class OffspringLaw:
    """A finitely supported offspring distribution"""

    probabilities: tuple[Number, ...]

    @classmethod
    def parse(cls, text: str) -> OffspringLaw:
        pairs = _parse_pairs(text)

        if not pairs:
            raise SpecFormatError("An offspring law needs at least one degree")

        values = [pairs.get(k, Fraction(0)) for k in range(max(pairs) + 1)]

        return cls(tuple(values))

    @property
    def support(self) -> list[int]:
        return [k for k, value in enumerate(self.probabilities) if value != 0]

    @property
    def mean(self) -> Number:
        return sum((k * value for k, value in enumerate(self.probabilities)), Fraction(0))

    def size_biased(self) -> tuple[Number, ...]:
        """p̂_k = k p_k, the spine degree law of a critical tree"""
        return tuple(k * value for k, value in enumerate(self.probabilities))

    def validate(self) -> None:
        exact = all(is_exact(value) for value in self.probabilities)
        tol = 0 if exact else 1e-12

        if any(value < 0 for value in self.probabilities):
            raise DomainError("Offspring probabilities must be non-negative")

        if abs(sum(self.probabilities) - 1) > tol:
            raise DomainError(f"Offspring probabilities sum to {sum(self.probabilities)}")

        if abs(self.mean - 1) > tol:
            raise DomainError(
                f"Offspring law is not critical (mean {format_number(self.mean)})"
            )

        head = self.probabilities[0] + (self.probabilities[1] if len(self.probabilities) > 1 else 0)

        if head >= 1:
            raise DomainError("Need p_0 + p_1 < 1")

    def to_dict(self) -> dict[str, str]:
        return {str(k): format_number(self.probabilities[k]) for k in self.support}


@dataclass(frozen=True)
class HomogeneousWalkParams:
    """Up with F(k), to each child with G(k), where k counts the children"""

    up: Mapping[int, Number] | Number
    per_child: Mapping[int, Number] | Number

    @classmethod
    def parse(cls, up: str, per_child: str) -> HomogeneousWalkParams:
        def read(text: str) -> Mapping[int, Number] | Number:
            return _parse_pairs(text) if ":" in text else parse_number(text)

        return cls(read(up), read(per_child))

    @staticmethod
    def _lookup(table: Mapping[int, Number] | Number, k: int, name: str) -> Number:
        if not isinstance(table, Mapping):
            return table

        try:
            return table[k]
        except KeyError as exc:
            raise DomainError(f"{name}({k}) is not given") from exc

    def F(self, k: int) -> Number:  # pylint: disable=invalid-name
        return self._lookup(self.up, k, "F")

    def G(self, k: int) -> Number:  # pylint: disable=invalid-name
        if k == 0:
            return Fraction(0)

        return self._lookup(self.per_child, k, "G")

    def stay(self, k: int) -> Number:
        return 1 - self.F(k) - k * self.G(k)

    @property
    def is_exact(self) -> bool:
        values = [
            *(self.up.values() if isinstance(self.up, Mapping) else [self.up]),
            *(
                self.per_child.values()
                if isinstance(self.per_child, Mapping)
                else [self.per_child]
            ),
        ]

        return all(is_exact(value) for value in values)

    def validate(self, degrees: Sequence[int]) -> None:
        for k in degrees:
            if not self.F(k) > 0:
                raise DomainError(f"F({k}) must be positive")

            if k > 0 and not self.G(k) > 0:
                raise DomainError(f"G({k}) must be positive")

            if self.stay(k) < 0:
                raise DomainError(f"F({k}) + {k}·G({k}) exceeds 1")

    def kernel(self, source: TreeSource) -> DegreeHomogeneous:
        return DegreeHomogeneous(
            source,
            self.F,
            self.G,
            exact=self.is_exact,
            params={"F": _describe(self.up), "G": _describe(self.per_child)},
        )


def _describe(table: Mapping[int, Number] | Number) -> Any:
    if isinstance(table, Mapping):
        return {str(k): format_number(value) for k, value in sorted(table.items())}

    return format_number(table)


@dataclass(frozen=True)
class GwStatistics:
    f: float
    mean_inverse_up: float
    m: float
    L: float  # pylint: disable=invalid-name
    summable: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "f": self.f,
            "E_inv_F": self.mean_inverse_up,
            "m": self.m,
            "L": self.L,
            "summable": self.summable,
        }


def gw_statistics(law: OffspringLaw, params: HomogeneousWalkParams) -> GwStatistics:
    """f = E(XG(X)/F(X)), m = E(1/F(X))/(1 − f), L = E(X log(G(X)/F(X)))"""
    law.validate()
    params.validate(law.support)

    f = sum(float(law.probabilities[k] * k * params.G(k) / params.F(k)) for k in law.support)
    inverse_up = sum(float(law.probabilities[k] / params.F(k)) for k in law.support)
    m = inverse_up / (1 - f) if f < 1 else math.inf
    log_ratio = 0.0

    for k in law.support:
        if k > 0:
            ratio = params.G(k) / params.F(k)

            if ratio != 1:
                log_ratio += float(k * law.probabilities[k]) * math.log(ratio)

    # a finite support makes the tail events eventually empty
    return GwStatistics(f, inverse_up, m, log_ratio, True)


def gw_classifier(law: OffspringLaw, params: HomogeneousWalkParams) -> Verdict:
    """Almost-sure positive recurrence of the degree-homogeneous walk on the Kesten tree"""
    stats = gw_statistics(law, params)
    evidence = [stats.to_dict()]

    if stats.L > 0:
        return Verdict(Outcome.NOT_POSITIVE_RECURRENT, evidence, 0, DEFAULT_EPS)

    if stats.L == 0:
        return Verdict(Outcome.INCONCLUSIVE, evidence, 0, DEFAULT_EPS, "L = 0")

    if not 0 < stats.f < 1:
        return Verdict(
            Outcome.INCONCLUSIVE, evidence, 0, DEFAULT_EPS, f"f = {stats.f} is outside (0, 1)"
        )

    if math.isfinite(stats.mean_inverse_up) and stats.summable:
        return Verdict(Outcome.POSITIVE_RECURRENT, evidence, 0, DEFAULT_EPS)

    return Verdict(
        Outcome.INCONCLUSIVE, evidence, 0, DEFAULT_EPS, "summability condition fails"
    )


@dataclass
class KestenSample:
    """A Kesten tree frozen after the spine reaches a given length

    The spine is u_0 = ∅, ..., u_n; the spine child of u_n is kept as a bare
    frontier leaf.
    """

    tree: FiniteTree
    spine: tuple[NodeWord, ...]
    origin: dict[NodeWord, Origin]
    seed: int | None
    with_grafts: bool = True
    resamples: int = 0
    degrees: tuple[int, ...] = field(default=())

    @property
    def frontier(self) -> NodeWord:
        return self.tree.ends[0].node(len(self.spine)) if self.tree.ends else self.spine[-1]

    def graft_roots(self, j: int) -> list[NodeWord]:
        spine_child = self.frontier if j == len(self.spine) - 1 else self.spine[j + 1]

        return [
            child for child in self.tree.children(self.spine[j]) if child != spine_child
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "spine_length": len(self.spine) - 1,
            "nodes": len(self.tree),
            "degrees": list(self.degrees),
            "resamples": self.resamples,
        }


def _draw(cumulative: np.ndarray, stream: UniformStream) -> int:
    index = int(np.searchsorted(cumulative, stream.uniform(), side="right"))

    return min(index, len(cumulative) - 1)


def _grow_graft(
    root: NodeWord,
    cumulative: np.ndarray,
    stream: UniformStream,
    cap: int,
    max_resamples: int,
) -> tuple[dict[NodeWord, list[NodeWord]], int]:
    """A GW tree grown to extinction below root, resampled when it passes the cap"""
    for attempt in range(max_resamples + 1):
        children: dict[NodeWord, list[NodeWord]] = {}
        queue = deque([root])
        size = 0

        while queue and size <= cap:
            node = queue.popleft()
            size += 1
            kids = [node.child(index) for index in range(_draw(cumulative, stream))]
            children[node] = kids
            queue.extend(kids)

        if not queue and size <= cap:
            return children, attempt

        _LOGGER.warning("Graft below %s passed %d nodes; resampling", root.parent, cap)

    raise ResourceLimitError(
        f"Graft exceeded {cap} nodes {max_resamples + 1} times", cap=cap
    )


def sample_kesten(
    law: OffspringLaw,
    spine_length: int,
    seed: int | None | UniformStream = 0,
    *,
    with_grafts: bool = True,
    graft_cap: int = DEFAULT_GRAFT_CAP,
    max_resamples: int = DEFAULT_MAX_RESAMPLES,
) -> KestenSample:
    """Spine degrees from p̂, one uniform child continues, the others root GW(p) trees"""
    law.validate()

    if spine_length < 1:
        raise DomainError("The spine needs at least one step")

    stream = seed if isinstance(seed, UniformStream) else UniformStream(seed)
    spine_law = np.cumsum([float(value) for value in law.size_biased()])
    offspring_law = np.cumsum([float(value) for value in law.probabilities])
    children: dict[NodeWord, list[NodeWord]] = {}
    origin: dict[NodeWord, Origin] = {}
    spine = [ROOT]
    degrees = []
    resamples = 0

    for j in range(spine_length + 1):
        node = spine[j]
        origin[node] = Origin.SPINE
        degree = max(1, _draw(spine_law, stream))
        continuation = stream.integers(degree)
        degrees.append(degree)
        children[node] = [node.child(index) for index in range(degree)]

        for index, child in enumerate(children[node]):
            if index == continuation:
                continue

            if with_grafts:
                graft, attempts = _grow_graft(
                    child, offspring_law, stream, graft_cap, max_resamples
                )
                resamples += attempts
                children.update(graft)

                for grafted in graft:
                    origin[grafted] = Origin.GRAFT
            else:
                origin[child] = Origin.GRAFT

        next_node = node.child(continuation)

        if j < spine_length:
            spine.append(next_node)
        else:
            origin[next_node] = Origin.SPINE

    tree = FiniteTree(children, ends=(Ray(tuple(next_node), (), "spine"),))
    _LOGGER.debug(
        "Kesten sample: spine %d, %d nodes, %d resamples", spine_length, len(tree), resamples
    )

    return KestenSample(
        tree,
        tuple(spine),
        origin,
        stream.seed,
        with_grafts,
        resamples,
        tuple(degrees),
    )


def sample_kesten_many(
    law: OffspringLaw,
    spine_length: int,
    count: int,
    seed: int | None = 0,
    *,
    with_grafts: bool = True,
    jobs: int = 1,
    **kwargs: Any,
) -> list[KestenSample]:
    """Independent samples from spawned streams; the result does not depend on jobs"""
    streams = UniformStream(seed).spawn(count)

    return run_jobs(
        [
            lambda stream=stream: sample_kesten(
                law, spine_length, stream, with_grafts=with_grafts, **kwargs
            )
            for stream in streams
        ],
        jobs,
    )


def spine_masses(sample: KestenSample, params: HomogeneousWalkParams) -> list[Number]:
    """π(u_j) = G(|c(∅)|)/F(|c(u_j)|) · ∏_{v∈]∅,u_j[} G(|c(v)|)/F(|c(v)|), π(∅) = 1"""
    degrees = sample.degrees
    masses: list[Number] = [Fraction(1) if params.is_exact else 1.0]
    product = params.G(degrees[0])

    for j in range(1, len(sample.spine)):
        masses.append(product / params.F(degrees[j]))
        product *= params.G(degrees[j]) / params.F(degrees[j])

    return masses


@dataclass(frozen=True)
class MassRow:
    depth: int
    spine_mass: Number
    graft_mass: Number
    cumulative: Number

    def to_dict(self) -> dict[str, Any]:
        return {
            "depth": self.depth,
            "spine_mass": format_number(self.spine_mass),
            "graft_mass": format_number(self.graft_mass),
            "cumulative": format_number(self.cumulative),
        }


def estimate_total(sample: KestenSample, params: HomogeneousWalkParams) -> list[MassRow]:
    """Cumulative invariant mass of the spine nodes and the grafts hanging off them"""
    if not sample.with_grafts:
        raise DomainError("Mass estimates need a sample grown with its grafts")

    params.validate(sorted(set(sample.tree.counts()) | {0}))
    kernel = params.kernel(sample.tree)
    spine = spine_masses(sample, params)
    grafts = [
        [grafted for root in sample.graft_roots(j) for grafted in sample.tree.descendants(root)]
        for j in range(len(sample.spine))
    ]
    measure = h_invariant_leaf_addition(kernel, [u for nodes in grafts for u in nodes])
    rows = []
    cumulative: Number = spine[0] - spine[0]

    for j, nodes in enumerate(grafts):
        graft_mass = sum((measure[u] for u in nodes), spine[j] - spine[j])

        cumulative += spine[j] + graft_mass
        rows.append(MassRow(j, spine[j], graft_mass, cumulative))

    return rows


def spine_log_mass_slope(
    samples: Sequence[KestenSample], params: HomogeneousWalkParams
) -> tuple[float, float]:
    """Pooled least-squares slope of log π(u_j) against j, with its standard error"""
    depths: list[float] = []
    logs: list[float] = []

    for sample in samples:
        for j, mass in enumerate(spine_masses(sample, params)):
            depths.append(j)
            logs.append(math.log(float(mass)))

    if len(set(depths)) < 2:
        raise DomainError("Need spines of length at least 1 to fit a slope")

    if len(depths) <= 3:
        slope, _ = np.polyfit(depths, logs, 1)
        return float(slope), math.inf

    coefficients, covariance = np.polyfit(depths, logs, 1, cov=True)

    return float(coefficients[0]), float(math.sqrt(max(covariance[0][0], 0.0)))

