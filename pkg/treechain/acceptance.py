"""Executable end-to-end checks run by `treechain selftest`"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction
from logging import Logger
from typing import Any

from .arith import Number, format_number, solve
from .classify import (
    classify_by_ends,
    classify_end,
    return_before_level,
    return_before_level_series,
)
from .contfrac import (
    StepWeights,
    cf_convergent,
    cf_limit,
    dyck_generating_function,
    green_aud,
    unit_continued_fraction,
)
from .const import Outcome
from .errors import MultipleEigenvalueError, OracleMismatchError, TreechainError
from .gw import (
    HomogeneousWalkParams,
    OffspringLaw,
    gw_classifier,
    gw_statistics,
    sample_kesten_many,
    spine_log_mass_slope,
)
from .invariant import (
    balance_residual,
    binary_split_measure,
    h_invariant_det_many,
    h_invariant_leaf_addition,
    integer_line_measure,
    lambda_eigenvector_finite,
)
from .kernel import (
    AudKernel,
    ExplicitKernel,
    GeometricDescendant,
    HeightDriven,
    LeafJump,
    LevelKernel,
    RandomWalk,
    UniformDescendantOrParent,
)
from .oracle import DenseChain, enumerate_paths, simulate, stationary_dense
from .projection import project_end, project_subtree, reverse, reverse_ald
from .series import PowerSeries
from .sternbrocot import TransitionFamily, sb_decode, sb_encode, sb_return_rate
from .stream import UniformStream
from .tree import (
    ROOT,
    FiniteTree,
    NodeWord,
    Ray,
    comb_tree,
    complete_tree,
    rays_tree,
    subtree_truncation,
    truncate,
)

_LOGGER = logging.getLogger(__name__)

FOUR_NODE_COUNTS = [3, 0, 0, 0]
FOUR_NODE_MATRIX = [
    [Fraction(1, 20), Fraction(1, 4), Fraction(1, 5), Fraction(1, 2)],
    [Fraction(1, 3), Fraction(2, 3), Fraction(0), Fraction(0)],
    [Fraction(1, 3), Fraction(0), Fraction(2, 3), Fraction(0)],
    [Fraction(1, 3), Fraction(0), Fraction(0), Fraction(2, 3)],
]


def four_node_kernel() -> ExplicitKernel:
    """The four-vertex example with spectrum {1, −17/60, 2/3, 2/3}"""
    return ExplicitKernel.from_dense(FiniteTree.from_counts(FOUR_NODE_COUNTS), FOUR_NODE_MATRIX)


def random_tree(stream: UniformStream, max_nodes: int, max_children: int = 3) -> FiniteTree:
    """Breadth-first growth with uniform child counts until the node budget runs out"""
    counts: list[int] = []
    pending = 1
    budget = max_nodes - 1

    while pending:
        pending -= 1
        count = min(stream.integers(max_children + 1), budget)
        budget -= count
        pending += count
        counts.append(count)

    return FiniteTree.from_counts(counts)


def random_aud_kernel(tree: FiniteTree, stream: UniformStream, spread: int = 3) -> ExplicitKernel:
    """Irreducible rational AUD rows: every parent and every child gets positive weight"""
    rows: dict[NodeWord, dict[NodeWord, Number]] = {}

    for u in tree.nodes:
        raw: dict[NodeWord, int] = {}

        if not u.is_root:
            raw[u.parent] = 1 + stream.integers(spread)

        children = set(tree.children(u))

        for v in tree.descendants(u):
            weight = stream.integers(spread)

            if v in children:
                weight += 1

            if weight:
                raw[v] = weight

        if not raw:
            raw[u] = 1

        total = sum(raw.values())
        rows[u] = {v: Fraction(weight, total) for v, weight in raw.items()}

    return ExplicitKernel(tree, rows)


def random_prefix_set(tree: FiniteTree, stream: UniformStream) -> list[NodeWord]:
    """A prefix-closed node set containing the root, each child kept with probability 2/3"""
    kept = {ROOT}

    for u in tree.nodes[1:]:
        if u.parent in kept and stream.integers(3):
            kept.add(u)

    return [u for u in tree.nodes if u in kept]


def random_step_weights(stream: UniformStream, period: int = 3, spread: int = 5) -> StepWeights:
    """Level-periodic rational Motzkin weights summing to 9/10 at every level"""
    table: list[tuple[Fraction, Fraction, Fraction]] = []

    for _ in range(period):
        stay, up, down = (stream.integers(spread) for _ in range(3))
        up, down = up + 1, down + 1
        total = 10 * (stay + up + down)
        table.append(
            (Fraction(9 * stay, total), Fraction(9 * up, total), Fraction(9 * down, total))
        )

    return StepWeights(
        lambda a: table[a % period][0],
        lambda a: table[a % period][1],
        lambda a: table[a % period][2],
    )


def random_spectral_matrix(
    stream: UniformStream, max_size: int = 5
) -> tuple[list[list[Fraction]], list[Fraction]]:
    """P·diag(1, λ_2, ..., λ_n)·P⁻¹ with distinct rational λ_k ≠ 1 and unit row sums

    P is unit lower triangular with a first column of ones, so P e_1 = 1 and
    every row of the product sums to 1.
    """
    size = 2 + stream.integers(max_size - 1)
    candidates = [Fraction(k, 10) for k in range(-9, 10)]
    spectrum = [Fraction(1)]
    spectrum += [candidates.pop(stream.integers(len(candidates))) for _ in range(size - 1)]
    basis = [[Fraction(int(j == 0 or i == j)) for j in range(size)] for i in range(size)]

    for i in range(2, size):
        for j in range(1, i):
            basis[i][j] = Fraction(stream.integers(5) - 2)

    columns = [solve(basis, [Fraction(int(i == k)) for i in range(size)]) for k in range(size)]
    inverse = [[columns[k][j] for k in range(size)] for j in range(size)]
    matrix = [
        [
            sum((basis[i][j] * spectrum[j] * inverse[j][k] for j in range(size)), Fraction(0))
            for k in range(size)
        ]
        for i in range(size)
    ]

    return matrix, spectrum[1:]


def _expect(condition: bool, message: str, **details: Any) -> None:
    if not condition:
        raise OracleMismatchError(message, **details)


def _same_ratios(kernel: AudKernel, measure, nodes) -> bool:
    """closed form and computed measure agree up to the root normalization"""
    root = kernel.closed_form_invariant(ROOT)

    return all(
        kernel.closed_form_invariant(u) * measure[ROOT] == measure[u] * root for u in nodes
    )


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "seconds": round(self.seconds, 3),
        }


CheckFunction = Callable[[bool, int, int], str]
CHECKS: dict[str, CheckFunction] = {}


def _check(name: str) -> Callable[[CheckFunction], CheckFunction]:
    def register(function: CheckFunction) -> CheckFunction:
        CHECKS[name] = function
        return function

    return register


@_check("four_node_fixture")
def check_four_node(quick: bool, seed: int, jobs: int) -> str:
    kernel = four_node_kernel()
    expected = dict(zip(kernel.tree.nodes, (Fraction(n, 77) for n in (20, 15, 12, 30))))

    dense = stationary_dense(DenseChain.from_kernel(kernel))
    by_det = h_invariant_det_many(kernel, kernel.tree.nodes, jobs=jobs).normalized()
    by_leaf = h_invariant_leaf_addition(kernel, kernel.tree.nodes).normalized()

    for name, measure in (("dense", dense), ("det", by_det), ("leaf", by_leaf)):
        _expect(dict(measure) == expected, f"{name} route gives {measure.to_dict()}")

    report = lambda_eigenvector_finite(FOUR_NODE_MATRIX, Fraction(-17, 60))
    scale = report.vector[1] / 5
    _expect(
        list(report.vector) == [scale * n for n in (-19, 5, 4, 10)],
        f"eigenvector for -17/60 is {[format_number(v) for v in report.vector]}",
    )

    try:
        lambda_eigenvector_finite(FOUR_NODE_MATRIX, Fraction(2, 3))
    except MultipleEigenvalueError:
        pass
    else:
        raise OracleMismatchError("2/3 was not refused as a double eigenvalue")

    return "(20, 15, 12, 30)/77 by three routes; -17/60 vector; 2/3 refused"


@_check("closed_forms")
def check_closed_forms(quick: bool, seed: int, jobs: int) -> str:
    stream = UniformStream(seed)
    trees = [random_tree(stream, 50) for _ in range(8 if quick else 20)]

    for tree in trees:
        for kernel in (UniformDescendantOrParent(tree), GeometricDescendant(tree, "1/3")):
            measure = h_invariant_leaf_addition(kernel, tree.nodes)
            _expect(
                _same_ratios(kernel, measure, tree.nodes),
                f"{kernel.family} closed form mismatch on {tree.counts()}",
            )

    lazy_kernels: list[AudKernel] = [
        HeightDriven(2, LevelKernel.birth_death("1/3", "1/2")),
        LeafJump("1/3", 2, comb_tree(2)),
        LeafJump("1/2", 3, comb_tree(3)),
    ]

    for kernel in lazy_kernels:
        trunc = truncate(kernel.source, 5)
        measure = h_invariant_leaf_addition(kernel, trunc)
        _expect(
            _same_ratios(kernel, measure, trunc.nodes),
            f"{kernel.family} closed form mismatch",
        )

    return f"{len(trees)} random trees and {len(lazy_kernels)} lazy families"


@_check("oracle_equivalence")
def check_oracle_equivalence(quick: bool, seed: int, jobs: int) -> str:
    stream = UniformStream(seed + 1)
    count = 20 if quick else 100
    compared = 0

    for _ in range(count):
        tree = random_tree(stream, 12)
        kernel = random_aud_kernel(tree, stream)
        dense = stationary_dense(DenseChain.from_kernel(kernel))
        by_det = h_invariant_det_many(kernel, tree.nodes).normalized()
        by_leaf = h_invariant_leaf_addition(kernel, tree.nodes).normalized()
        _expect(dict(dense) == dict(by_det) == dict(by_leaf), f"routes differ on {tree.counts()}")

        for i in tree.children(ROOT):
            for h in range(2, min(tree.height, 4) + 2):
                region = subtree_truncation(tree, i, h)
                chain = DenseChain.from_kernel(kernel, (ROOT, *region), defective=True)
                degree = 10
                series = return_before_level_series(kernel, i, h, degree)
                paths = enumerate_paths(chain, i, ROOT, degree, first_hit=True, strategy="layered")
                _expect(
                    series.coefficients == paths.coefficients,
                    f"first-hit series differ at {i}, h={h}",
                )
                compared += 1

    return f"{count} random kernels, {compared} first-hit series"


@_check("integer_line")
def check_integer_line(quick: bool, seed: int, jobs: int) -> str:
    kernel = RandomWalk.integer_walk(Fraction(2, 3))
    ends = {ray.label: ray for ray in rays_tree(2).ends}
    plus = project_end(kernel, ends["P+"])
    minus = project_end(kernel, ends["P-"])
    _expect(plus.point_weight(ROOT, ROOT) == Fraction(1, 3), "P+ root weight")
    _expect(minus.point_weight(ROOT, ROOT) == Fraction(2, 3), "P- root weight")

    verdict = classify_by_ends(kernel, h_max=32 if quick else 64, jobs=jobs)
    outcomes = {name: child.outcome for name, child in verdict.children.items()}
    _expect(verdict.outcome == Outcome.TRANSIENT, f"overall {verdict.outcome}")
    _expect(
        outcomes == {"P+": Outcome.TRANSIENT, "P-": Outcome.POSITIVE_RECURRENT},
        f"per end {outcomes}",
    )

    measure = integer_line_measure(Fraction(1, 4))

    for j in range(21):
        for letter in (0, 1):
            u = NodeWord((letter,) * j)
            _expect(balance_residual(kernel, measure, u) == 0, f"residual at {u}")

    return "projections, verdicts and the second measure"


@_check("binary_tree_walks")
def check_binary_tree_walks(quick: bool, seed: int, jobs: int) -> str:
    biased = RandomWalk.homogeneous(complete_tree(2), Fraction(9, 23), Fraction(7, 23))
    end_kernel = project_end(biased, Ray((), (0,), "leftmost"))
    verdict = classify_end(end_kernel, h_max=32)
    _expect(verdict.outcome == Outcome.POSITIVE_RECURRENT, f"end verdict {verdict.outcome}")

    steps = 100_000 if quick else 1_000_000
    run = simulate(biased, ROOT, steps, seed)
    drift = Fraction(5, 23)
    _expect(
        abs(run.drift - float(drift)) <= 3 * run.drift_stderr,
        f"drift {run.drift:.5f} ± {run.drift_stderr:.5f}",
    )

    simple = RandomWalk.homogeneous(complete_tree(2), Fraction(1, 3), Fraction(1, 3))

    for x in (Fraction(1, 4), Fraction(1, 2)):
        measure = binary_split_measure(x)

        for k in range(21):
            for u in {NodeWord((0,) * k), NodeWord((1,) * k), NodeWord((0,) + (1,) * k)}:
                _expect(balance_residual(simple, measure, u) == 0, f"residual at {u}, x={x}")

    return f"end PositiveRecurrent, drift {run.drift:.4f}"


@_check("galton_watson")
def check_galton_watson(quick: bool, seed: int, jobs: int) -> str:
    law = OffspringLaw.parse("0:1/2,2:1/2")
    good = HomogeneousWalkParams.parse("1/2", "2:1/4")
    bad = HomogeneousWalkParams.parse("1/4", "2:3/8")

    _expect(gw_classifier(law, good).outcome == Outcome.POSITIVE_RECURRENT, "L<0 verdict")
    _expect(gw_classifier(law, bad).outcome == Outcome.NOT_POSITIVE_RECURRENT, "L>0 verdict")

    count = 20 if quick else 100
    samples = sample_kesten_many(law, 200, count, seed, with_grafts=False, jobs=jobs)
    expected = gw_statistics(law, good).L
    slope, stderr = spine_log_mass_slope(samples, good)
    _expect(
        abs(slope - expected) <= 0.2 * abs(expected),
        f"slope {slope:.4f} ± {stderr:.4f} against L = {expected:.4f}",
    )

    return f"slope {slope:.4f} over {count} samples, L = {expected:.4f}"


@_check("continued_fractions")
def check_continued_fractions(quick: bool, seed: int, jobs: int) -> str:
    for x in (0.1, 0.25, 0.4):
        limit = cf_limit(StepWeights.dyck(x), tol=1e-14)
        _expect(
            abs(limit.value - dyck_generating_function(x)) <= 1e-10,
            f"Dyck limit at {x}: {limit.value}",
        )

    degree = 17
    series = cf_convergent(StepWeights.dyck(PowerSeries.variable(degree)), 10).value
    catalan = [math.comb(2 * n, n) // (n + 1) for n in range(9)]
    _expect(
        [series[2 * n] for n in range(9)] == catalan,
        f"Dyck coefficients {[series[2 * n] for n in range(9)]}",
    )

    golden = (1 + math.sqrt(5)) / 2
    _expect(abs(unit_continued_fraction(60) - golden) <= 1e-12, "golden ratio")

    kernel = four_node_kernel()
    x = Fraction(1, 2)
    green = green_aud(kernel, ROOT, x, 1)
    length = 24
    partial = enumerate_paths(
        DenseChain.from_kernel(kernel), ROOT, ROOT, length, x=x, strategy="layered"
    )
    tail = x ** (length + 1) / (1 - x)
    _expect(
        0 <= green.value - partial <= tail,
        f"green {float(green.value)} against partial sum {float(partial)}",
    )

    return "Dyck limits, Catalan coefficients, golden ratio, four-node Green function"


@_check("stern_brocot")
def check_stern_brocot(quick: bool, seed: int, jobs: int) -> str:
    words = 0

    for length in range(13):
        for code in range(2**length):
            u = NodeWord((code >> k) & 1 for k in range(length))
            _expect(sb_decode(sb_encode(u)) == u, f"round trip of {u}")
            words += 1

    family = TransitionFamily.constant("1/4", "1/4", "1/2", "0")
    runs = 200 if quick else 1000
    rate = sb_return_rate(family, Fraction(7, 5), 100_000, runs, seed, jobs)
    # P(return within 10^5 steps) = 0.9899 to four places
    _expect(rate >= 0.98, f"return rate {rate:.4f}")

    return f"{words} words; return rate {rate:.4f} over {runs} runs"


@_check("property_suites")
def check_property_suites(quick: bool, seed: int, jobs: int) -> str:
    stream = UniformStream(seed + 2)
    cases = 50 if quick else 500

    for _ in range(cases):
        history = cf_convergent(random_step_weights(stream), 12).history
        _expect(
            all(a <= b for a, b in zip(history, history[1:])),
            f"convergents decrease: {[format_number(value) for value in history]}",
        )

    for _ in range(cases):
        tree = random_tree(stream, 12)
        kernel = random_aud_kernel(tree, stream)

        for i in tree.children(ROOT):
            values = [return_before_level(kernel, i, h) for h in range(2, tree.height + 3)]
            _expect(
                0 <= values[0] and values[-1] <= 1,
                f"return probability out of range at {i} on {tree.counts()}",
            )
            _expect(
                all(a <= b for a, b in zip(values, values[1:])),
                f"return probability decreases in h at {i} on {tree.counts()}",
            )

        kept = random_prefix_set(tree, stream)
        once = project_subtree(kernel, kept)
        twice = project_subtree(once, kept)
        _expect(
            all(once.point_weight(u, v) == twice.point_weight(u, v) for u in kept for v in kept),
            f"projecting twice onto {[str(u) for u in kept]} changes the kernel",
        )

        pi = h_invariant_leaf_addition(kernel, tree.nodes)
        _expect(
            reverse_ald(reverse(kernel, pi), pi).dense() == kernel.dense(),
            f"reversing twice changes the kernel on {tree.counts()}",
        )

    for _ in range(cases):
        matrix, spectrum = random_spectral_matrix(stream)

        for lam in spectrum:
            report = lambda_eigenvector_finite(matrix, lam)
            _expect(
                sum(report.vector) == 0,
                f"eigenvector for {format_number(lam)} sums to {format_number(sum(report.vector))}",
            )

    return f"{cases} cases for each of five properties"


def run_selftest(
    quick: bool = False,
    seed: int = 0,
    jobs: int = 1,
    only: list[str] | None = None,
    logger: Logger = _LOGGER,
) -> list[CheckResult]:
    """Run the registered checks in order, one result per check"""
    results = []

    for name, function in CHECKS.items():
        if only and name not in only:
            continue

        started = time.perf_counter()

        try:
            detail = function(quick, seed, jobs)
            passed = True
        except TreechainError as exc:
            detail = exc.message
            passed = False
        except Exception as exc:  # pylint: disable=broad-except
            logger.error("Check %s crashed: %s", name, str(exc))
            detail = f"{type(exc).__name__}: {exc}"
            passed = False

        result = CheckResult(name, passed, detail, time.perf_counter() - started)
        logger.info("%s %s (%.2fs): %s", "PASS" if passed else "FAIL", name, result.seconds, detail)
        results.append(result)

    return results
