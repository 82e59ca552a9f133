import math
from fractions import Fraction

import pytest
from hypothesis import given

from treechain.const import TailMode
from treechain.contfrac import (
    BinaryWalkParams,
    StepWeights,
    binary_homogeneous_g,
    cf_convergent,
    cf_limit,
    dyck_generating_function,
    green_aud,
    green_rw,
    unit_continued_fraction,
    unit_nested_radical,
)
from treechain.errors import DivergenceError, DomainError
from treechain.kernel import RandomWalk
from treechain.oracle import DenseChain, enumerate_paths
from treechain.series import PowerSeries
from treechain.tree import ROOT, NodeWord

from .strategies import acceptance, step_weights

GOLDEN = (1 + math.sqrt(5)) / 2


def test_dyck_convergents_exact():
    weights = StepWeights.dyck(Fraction(1, 3))

    assert cf_convergent(weights, 0).value == 1
    assert cf_convergent(weights, 1).value == Fraction(9, 8)

    convergent = cf_convergent(weights, 3)

    assert convergent.depth == 3
    assert len(convergent.history) == 4
    assert convergent.history[1] == Fraction(9, 8)


def test_convergent_negative_depth():
    with pytest.raises(DomainError):
        cf_convergent(StepWeights.dyck(Fraction(1, 3)), -1)


def test_dyck_series_counts_catalan_paths():
    convergent = cf_convergent(StepWeights.dyck(PowerSeries.variable(8)), 4)

    assert list(convergent.value.coefficients) == [1, 0, 1, 0, 2, 0, 5, 0, 14]


def test_dyck_series_height_cap():
    # height at most one: only up-down pairs
    convergent = cf_convergent(StepWeights.dyck(PowerSeries.variable(6)), 1)

    assert list(convergent.value.coefficients) == [1, 0, 1, 0, 1, 0, 1]


def test_motzkin_series():
    x = PowerSeries.variable(6)
    convergent = cf_convergent(StepWeights.constant(x, x, x), 6)

    assert list(convergent.value.coefficients) == [1, 1, 2, 4, 9, 21, 51]


def test_cf_limit_matches_closed_form():
    convergent = cf_limit(StepWeights.dyck(0.4))

    assert convergent.converged
    assert convergent.value == pytest.approx(dyck_generating_function(0.4), rel=1e-9)
    assert convergent.value == pytest.approx(1.25, rel=1e-9)


def test_cf_limit_reports_unsettled():
    convergent = cf_limit(StepWeights.dyck(0.5), max_depth=10)

    assert not convergent.converged
    assert convergent.depth == 10
    assert convergent.value < 2
    assert convergent.to_dict()["converged"] is False


def test_vanishing_denominator():
    with pytest.raises(DivergenceError):
        cf_convergent(StepWeights.constant(0, 1, 1), 3)


def test_dyck_generating_function():
    assert dyck_generating_function(0) == 1.0
    assert dyck_generating_function(0.5) == pytest.approx(2.0)

    with pytest.raises(DomainError):
        dyck_generating_function(0.6)


def test_unit_fractions_reach_golden_ratio():
    assert unit_continued_fraction(40) == pytest.approx(GOLDEN)
    assert unit_nested_radical(40) == pytest.approx(GOLDEN)
    assert unit_continued_fraction(0) == 1.0


def test_green_rw_line_walk():
    kernel = RandomWalk.birth_death(forward=Fraction(1, 3), backward=Fraction(1, 2))
    u = NodeWord((0,))

    shallow = green_rw(kernel, u, Fraction(1), 0)

    assert shallow.value == Fraction(6, 5)
    assert shallow.return_value == Fraction(1, 6)
    assert shallow.previous is None

    assert green_rw(kernel, u, Fraction(1), 0, tail=TailMode.ONE).value == Fraction(3, 2)

    deep = green_rw(kernel, u, 1.0, 200)

    assert deep.converged
    assert deep.value == pytest.approx(2.0)


def test_green_rw_needs_random_walk(four_node):
    with pytest.raises(DomainError):
        green_rw(four_node, ROOT, Fraction(1, 2), 1)


def test_green_aud_agrees_with_green_rw():
    kernel = RandomWalk.birth_death(forward=Fraction(1, 3), backward=Fraction(1, 2))
    u = NodeWord((0,))

    for tail in TailMode:
        assert (
            green_aud(kernel, u, Fraction(1), 5, tail=tail).value
            == green_rw(kernel, u, Fraction(1), 5, tail=tail).value
        )


def test_green_aud_four_node(four_node):
    with pytest.raises(DivergenceError):
        green_aud(four_node, ROOT, Fraction(1), 1)

    green = green_aud(four_node, ROOT, Fraction(1, 2), 1)

    assert green.value == Fraction(160, 137)
    assert green.return_value == Fraction(23, 160)
    assert green.to_dict()["value"] == "160/137"


def test_green_aud_series_matches_path_enumeration(four_node):
    green = green_aud(four_node, ROOT, PowerSeries.variable(6), 1)
    paths = enumerate_paths(DenseChain.from_kernel(four_node), ROOT, ROOT, 6)

    assert green.value == paths


def test_binary_homogeneous_g():
    third = Fraction(1, 3)
    report = binary_homogeneous_g(BinaryWalkParams.constant(third, third, 0, third), 60)

    assert report.branch == "minus"
    assert report.values[0] == pytest.approx(1.5, rel=1e-6)
    assert report.root_value == pytest.approx(1.5, rel=1e-6)
    assert report.residual < 1e-9
    assert len(report.values) == 61
    assert set(report.to_dict()) == {"g", "residual", "branch", "G_root"}


def test_binary_homogeneous_g_outside_regime():
    half = Fraction(1, 2)

    with pytest.raises(DomainError):
        binary_homogeneous_g(BinaryWalkParams.constant(half, half, 0, half), 4)


@acceptance
@given(step_weights())
def test_convergents_grow_with_depth(weights):
    history = cf_convergent(weights, 12).history

    assert history[0] >= 1
    assert all(a <= b for a, b in zip(history, history[1:]))
