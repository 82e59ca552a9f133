from unittest.mock import Mock, patch

import pytest

from treechain.acceptance import CHECKS, run_selftest
from treechain.errors import OracleMismatchError

QUICK = [
    "four_node_fixture",
    "closed_forms",
    "oracle_equivalence",
    "integer_line",
    "galton_watson",
    "continued_fractions",
    "property_suites",
]


def test_checks_are_registered():
    assert list(CHECKS) == [
        "four_node_fixture",
        "closed_forms",
        "oracle_equivalence",
        "integer_line",
        "binary_tree_walks",
        "galton_watson",
        "continued_fractions",
        "stern_brocot",
        "property_suites",
    ]


@pytest.mark.parametrize("name", QUICK)
def test_quick_check(name):
    (result,) = run_selftest(quick=True, only=[name])

    assert result.passed, result.detail


@pytest.mark.slow
@pytest.mark.parametrize("name", ["binary_tree_walks", "stern_brocot"])
def test_slow_check(name):
    (result,) = run_selftest(quick=True, only=[name])

    assert result.passed, result.detail


def test_failures_are_reported():
    logger = Mock()

    def mismatch(quick, seed, jobs):
        raise OracleMismatchError("routes differ")

    def crash(quick, seed, jobs):
        raise RuntimeError("boom")

    with patch.dict(CHECKS, {"mismatch": mismatch, "crash": crash}, clear=True):
        results = run_selftest(logger=logger)

    assert [(result.name, result.passed) for result in results] == [
        ("mismatch", False),
        ("crash", False),
    ]
    assert results[0].detail == "routes differ"
    assert results[1].detail == "RuntimeError: boom"
    logger.error.assert_called_once_with("Check %s crashed: %s", "crash", "boom")
    assert results[0].to_dict()["passed"] is False
