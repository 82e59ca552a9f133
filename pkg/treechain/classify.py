"""Recurrence and positive-recurrence verdicts for AUD kernels

Every verdict other than Inconclusive is read off a finite probe and is
therefore heuristic; the evidence table says what was seen.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Hashable, Sequence
from dataclasses import dataclass, field
from typing import Any

from .arith import Number, determinant, format_number, minor, shifted, solve
from .const import (
    DEFAULT_DECAY_THRESHOLD,
    DEFAULT_EPS,
    DEFAULT_GROWTH_WINDOW,
    DEFAULT_H_MAX,
    DEFAULT_LEVEL_CAP,
    DEFAULT_PR_DEPTH,
    DEFAULT_RATIO_MARGIN,
    DEFAULT_SERIES_DEGREE,
    EXACT_REGION_CAP,
    FLOAT_REGION_CAP,
    Outcome,
)
from .errors import DomainError, ResourceLimitError
from .invariant import level_measures
from .jobs import run_jobs
from .kernel import AudKernel
from .projection import project_end
from .series import PowerSeries, series_det
from .tree import ROOT, EndDescription, NodeWord, Undetermined, detect_ends, subtree_truncation

_LOGGER = logging.getLogger(__name__)


@dataclass
class Verdict:
    """A classification outcome with the evidence it rests on"""

    outcome: Outcome
    evidence: list[dict[str, Any]] = field(default_factory=list)
    certification_depth: int = 0
    tolerance: float = DEFAULT_EPS
    reason: str | None = None
    children: dict[str, Verdict] = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome == Outcome.INCONCLUSIVE and not self.reason:
            raise ValueError("Inconclusive verdicts must carry a reason")

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any] = {
            "outcome": self.outcome.value,
            "certification_depth": self.certification_depth,
            "tolerance": self.tolerance,
            "evidence": self.evidence,
        }

        if self.reason:
            result["reason"] = self.reason

        if self.children:
            result["children"] = {
                name: child.to_dict() for name, child in self.children.items()
            }

        return result


def _first_generation(kernel: AudKernel, i: NodeWord) -> NodeWord:
    i = NodeWord(i)

    if len(i) != 1 or i not in kernel.source.children(ROOT):
        raise DomainError(f"{i} is not a child of the root")

    return i


def _restricted(kernel: AudKernel, region: Sequence[NodeWord], h: int) -> list[list[Number]]:
    """U_{[i,<h]}: the defective restriction of U to the region"""
    index = {node: k for k, node in enumerate(region)}
    matrix = [[kernel.zero] * len(region) for _ in region]

    for row, u in enumerate(region):
        if not u.is_root and u.parent in index:
            matrix[row][index[u.parent]] = kernel.parent_weight(u)

        for v in kernel.source.descendants(u, max_depth=h - 1):
            weight = kernel.point_weight(u, v)

            if weight != 0:
                matrix[row][index[v]] = weight

    return matrix


class _HittingRecursion:
    """q_v = U_{v,p(v)} / (1 − U_{v,v} − Σ_c U_{v,c} q_c) below a level, memoized by shape"""

    def __init__(self, kernel: AudKernel):
        self.kernel = kernel
        self._memo: dict[tuple[Hashable, int], Number] = {}

    def __call__(self, v: NodeWord, remaining: int) -> Number:
        key = (self.kernel.shape_key(v), remaining)
        cached = self._memo.get(key)

        if cached is not None:
            return cached

        kernel = self.kernel
        denominator = kernel.one - kernel.point_weight(v, v)

        if remaining > 1:
            for child in kernel.source.children(v):
                weight = kernel.point_weight(v, child)

                if weight != 0:
                    denominator -= weight * self(child, remaining - 1)

        value = kernel.parent_weight(v) / denominator
        self._memo[key] = value

        return value


def return_before_level(
    kernel: AudKernel,
    i: NodeWord,
    h: int,
    *,
    _recursion: _HittingRecursion | None = None,
) -> Number:
    """P(τ_∅ < τ_{T≥h} | X_0 = i) for a child i of the root"""
    i = _first_generation(kernel, i)

    if h < 2:
        raise DomainError("The level must be at least 2")

    if kernel.is_random_walk:
        recursion = _recursion if _recursion is not None else _HittingRecursion(kernel)

        return recursion(i, h - 1)

    region = subtree_truncation(kernel.source, i, h, cap=FLOAT_REGION_CAP)
    restricted = shifted(_restricted(kernel, region, h))
    exit_weight = kernel.parent_weight(i)

    if len(region) > EXACT_REGION_CAP or not kernel.is_exact:
        rhs = [1.0] + [0.0] * (len(region) - 1)
        green = solve([[float(value) for value in row] for row in restricted], rhs)[0]

        return green * float(exit_weight)

    numerator = determinant(minor(restricted, [0], [0])).value
    denominator = determinant(restricted).value

    return numerator / denominator * exit_weight


def return_before_level_series(
    kernel: AudKernel, i: NodeWord, h: int, degree: int = DEFAULT_SERIES_DEGREE
) -> PowerSeries:
    """The same probability with U replaced by xU, as a power series in x"""
    i = _first_generation(kernel, i)
    region = subtree_truncation(kernel.source, i, h, cap=EXACT_REGION_CAP)
    x = PowerSeries.variable(degree)
    matrix = _restricted(kernel, region, h)
    size = len(matrix)
    series = [
        [(1 if r == c else 0) - x * matrix[r][c] for c in range(size)] for r in range(size)
    ]
    numerator = (
        series_det(minor(series, [0], [0])) if size > 1 else PowerSeries.constant(1, degree)
    )

    return numerator / series_det(series) * x * kernel.parent_weight(i)


def _tail_estimate(values: Sequence[float]) -> tuple[float, float]:
    """Last increment and a geometric bound on what the sequence still gains"""
    if len(values) < 3:
        return math.inf, math.inf

    last = values[-1] - values[-2]
    previous = values[-2] - values[-3]

    if last <= 0:
        return 0.0, 0.0

    if previous <= 0:
        return math.inf, last

    ratio = last / previous

    if ratio >= 1:
        return ratio, math.inf

    return ratio, last * ratio / (1 - ratio)


def classify_recurrence(
    kernel: AudKernel,
    h_max: int = DEFAULT_H_MAX,
    eps: float = DEFAULT_EPS,
    decay_threshold: float = DEFAULT_DECAY_THRESHOLD,
    jobs: int = 1,
) -> Verdict:
    """Recurrent when every child returns to the root before level h with probability → 1"""
    children = kernel.source.children(ROOT)

    if not children:
        return Verdict(Outcome.RECURRENT, [], 0, eps, "single-node tree")

    recursion = _HittingRecursion(kernel) if kernel.is_random_walk else None

    def probe(i: NodeWord) -> list[float]:
        values: list[float] = []

        for h in range(2, h_max + 1):
            try:
                value = return_before_level(kernel, i, h, _recursion=recursion)
            except ResourceLimitError as exc:
                _LOGGER.warning("Stopping the probe below %s at level %d: %s", i, h, exc.message)
                break

            values.append(float(value))

        return values

    # the shared memo is not thread safe
    tables = run_jobs([lambda i=i: probe(i) for i in children], 1 if recursion else jobs)
    evidence = []
    transient = False
    recurrent = True
    depth = h_max

    for i, values in zip(children, tables):
        depth = min(depth, len(values) + 1)

        for h, value in enumerate(values, start=2):
            evidence.append({"child": str(i), "h": h, "value": format_number(value)})

        if not values:
            recurrent = False
            continue

        ratio, tail = _tail_estimate(values)
        _LOGGER.debug(
            "Child %s: value %.12g, increment ratio %.3g, tail %.3g", i, values[-1], ratio, tail
        )

        if values[-1] < 1 - 10 * eps and tail < eps and ratio < decay_threshold:
            transient = True

        if not (values[-1] > 1 - eps and tail < eps):
            recurrent = False

    if transient:
        return Verdict(Outcome.TRANSIENT, evidence, depth, eps)

    if recurrent:
        return Verdict(Outcome.RECURRENT, evidence, depth, eps)

    return Verdict(
        Outcome.INCONCLUSIVE,
        evidence,
        depth,
        eps,
        "return probabilities neither reach 1 nor settle below it",
    )


def _level_sums(kernel: AudKernel, depth: int, cap: int) -> tuple[list[Number], bool]:
    """S_0..S_depth, and whether they come from a family closed form"""
    closed = [kernel.closed_form_level_sum(k) for k in range(depth + 1)]

    if all(value is not None for value in closed):
        return closed, True

    sums: list[Number] = []

    try:
        for level in level_measures(kernel, depth, cap):
            values = list(level.values())
            sums.append(sum(values[1:], values[0]) if values else kernel.zero)
    except ResourceLimitError as exc:
        _LOGGER.warning("Level sums stop at depth %d: %s", len(sums) - 1, exc.message)

    return sums, False


def classify_positive_recurrence(
    kernel: AudKernel,
    depth: int = DEFAULT_PR_DEPTH,
    growth_window: int = DEFAULT_GROWTH_WINDOW,
    decay_threshold: float = DEFAULT_DECAY_THRESHOLD,
    ratio_margin: float = DEFAULT_RATIO_MARGIN,
    cap: int = DEFAULT_LEVEL_CAP,
) -> Verdict:
    """Positive recurrent iff the h-invariant measure has finite mass"""
    if kernel.source.is_finite:
        return Verdict(Outcome.POSITIVE_RECURRENT, [], 0, ratio_margin, None)

    sums, closed_form = _level_sums(kernel, depth, cap)
    evidence = [
        {"depth": k, "level_sum": format_number(value)} for k, value in enumerate(sums)
    ]
    reached = len(sums) - 1

    if reached < growth_window + 1:
        return Verdict(
            Outcome.INCONCLUSIVE,
            evidence,
            reached,
            ratio_margin,
            f"only {reached + 1} levels could be summed",
        )

    if sums[-1] == 0:
        return Verdict(Outcome.POSITIVE_RECURRENT, evidence, reached, ratio_margin, None)

    window = [float(value) for value in sums[-growth_window - 1 :]]
    ratios = [b / a for a, b in zip(window, window[1:]) if a > 0]

    if ratios and max(ratios) < decay_threshold:
        return Verdict(
            Outcome.POSITIVE_RECURRENT,
            evidence,
            reached,
            ratio_margin,
            None if closed_form else "geometric decay of probed level sums",
        )

    if ratios and min(ratios) >= 1 - ratio_margin:
        return Verdict(Outcome.NOT_POSITIVE_RECURRENT, evidence, reached, ratio_margin)

    return Verdict(
        Outcome.INCONCLUSIVE,
        evidence,
        reached,
        ratio_margin,
        "level sums decay too slowly to certify a finite total",
    )


def _combine_end(recurrence: Verdict, positive: Verdict) -> Outcome:
    if positive.outcome == Outcome.POSITIVE_RECURRENT:
        return Outcome.POSITIVE_RECURRENT

    if recurrence.outcome in (Outcome.TRANSIENT, Outcome.RECURRENT):
        return recurrence.outcome

    return Outcome.INCONCLUSIVE


def classify_end(
    kernel: AudKernel,
    h_max: int = DEFAULT_H_MAX,
    depth: int = DEFAULT_PR_DEPTH,
    eps: float = DEFAULT_EPS,
) -> Verdict:
    """Both tests on a single-end kernel, merged into one verdict"""
    recurrence = classify_recurrence(kernel, h_max, eps)
    positive = classify_positive_recurrence(kernel, depth)
    outcome = _combine_end(recurrence, positive)

    return Verdict(
        outcome,
        recurrence.evidence + positive.evidence,
        min(recurrence.certification_depth, positive.certification_depth),
        eps,
        "neither test was conclusive" if outcome == Outcome.INCONCLUSIVE else None,
    )


def classify_by_ends(
    kernel: AudKernel,
    ends: EndDescription | None = None,
    h_max: int = DEFAULT_H_MAX,
    depth: int = DEFAULT_PR_DEPTH,
    eps: float = DEFAULT_EPS,
    jobs: int = 1,
) -> Verdict:
    """Recurrent iff every end projection is; transient as soon as one is"""
    if ends is None:
        if kernel.source.uncountable_ends:
            raise DomainError(
                "The tree has uncountably many ends; use classify_recurrence instead"
            )

        found = detect_ends(kernel.source)

        if isinstance(found, Undetermined):
            raise DomainError(
                f"End structure is undetermined ({found.reason}); "
                "use classify_recurrence instead"
            )

        ends = found

    if not ends.ends:
        return Verdict(Outcome.POSITIVE_RECURRENT, [], 0, eps, None)

    verdicts = run_jobs(
        [
            lambda end=end: classify_end(project_end(kernel, end), h_max, depth, eps)
            for end in ends.ends
        ],
        jobs,
    )
    children = {end.name: verdict for end, verdict in zip(ends.ends, verdicts)}
    outcomes = [verdict.outcome for verdict in verdicts]
    certified = min(verdict.certification_depth for verdict in verdicts)

    for end, verdict in children.items():
        _LOGGER.info("End %s: %s", end, verdict.outcome.value)

    if Outcome.TRANSIENT in outcomes:
        return Verdict(Outcome.TRANSIENT, [], certified, eps, None, children)

    if all(outcome == Outcome.POSITIVE_RECURRENT for outcome in outcomes):
        return Verdict(Outcome.POSITIVE_RECURRENT, [], certified, eps, None, children)

    if all(outcome in (Outcome.RECURRENT, Outcome.POSITIVE_RECURRENT) for outcome in outcomes):
        return Verdict(Outcome.RECURRENT, [], certified, eps, None, children)

    return Verdict(
        Outcome.INCONCLUSIVE, [], certified, eps, "an end could not be classified", children
    )
