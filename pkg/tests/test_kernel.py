from fractions import Fraction

import pytest
from hypothesis import given

from treechain.acceptance import FOUR_NODE_MATRIX
from treechain.const import KernelFamily, ViolationKind
from treechain.errors import DomainError, MissingCapabilityError, SpecFormatError
from treechain.kernel import (
    CounterexampleNode,
    DegreeHomogeneous,
    ExplicitAldKernel,
    ExplicitKernel,
    GeometricDescendant,
    HeightDriven,
    LeafJump,
    LevelKernel,
    LevelRow,
    NeighborWeights,
    Pass,
    RandomWalk,
    UniformDescendantOrParent,
    check_irreducible,
    validate_ald,
    validate_aud,
)
from treechain.stream import UniformStream
from treechain.tree import ROOT, NodeWord, comb_tree, complete_tree, line_tree, truncate

from .strategies import small_kernels

HALF = Fraction(1, 2)


def _stationary_defect(kernel, nodes):
    """Largest |πM − π| entry for the closed-form measure on a closed set of nodes"""
    pi = {u: kernel.closed_form_invariant(u) for u in nodes}

    return max(
        abs(sum(pi[u] * kernel.point_weight(u, v) for u in nodes) - pi[v]) for v in nodes
    )


def test_four_node_kernel(four_node):
    assert four_node.dense() == FOUR_NODE_MATRIX
    assert four_node.is_exact
    assert four_node.parent_weight(NodeWord((2,))) == Fraction(1, 3)
    assert four_node.subtree_mass(ROOT, ROOT) == 1
    assert four_node.subtree_mass(ROOT, NodeWord((2,))) == HALF
    assert validate_aud(four_node, truncate(four_node.tree, 1)) == []
    assert check_irreducible(four_node, truncate(four_node.tree, 1)) == Pass(1)


def test_explicit_kernel_rejects_unknown_nodes(path3):
    with pytest.raises(SpecFormatError):
        ExplicitKernel(path3, {(1,): {(): 1}})

    with pytest.raises(SpecFormatError):
        ExplicitKernel(path3, {(): {(5,): 1}})

    with pytest.raises(SpecFormatError):
        ExplicitKernel.from_dense(path3, [[1, 0], [0, 1]])


def test_validate_support(path3):
    kernel = ExplicitKernel(
        path3,
        {
            (): {(): HALF, (0,): HALF},
            (0,): {(): HALF, (0, 0): HALF},
            (0, 0): {(): HALF, (0,): HALF},
        },
    )

    violations = validate_aud(kernel, truncate(path3, 2))

    assert [(v.kind, v.node, v.target) for v in violations] == [
        (ViolationKind.SUPPORT, (0, 0), ())
    ]
    assert violations[0].to_dict()["target"] == "∅"


def test_validate_stochastic_and_negative(path3):
    kernel = ExplicitKernel(
        path3,
        {
            (): {(): HALF},
            (0,): {(): Fraction(3, 2), (0, 0): -HALF},
            (0, 0): {(0,): 1},
        },
    )

    kinds = {violation.kind for violation in validate_aud(kernel, truncate(path3, 2))}

    assert kinds == {ViolationKind.STOCHASTIC, ViolationKind.NEGATIVE}


def test_check_irreducible_counterexample(path3):
    kernel = ExplicitKernel(
        path3,
        {(): {(0,): 1}, (0,): {(0, 0): 1}, (0, 0): {(0,): 1}},
    )

    result = check_irreducible(kernel, truncate(path3, 2))

    assert isinstance(result, CounterexampleNode)
    assert result.node == (0,)
    assert not result


def test_check_irreducible_unreachable_subtree(path3):
    kernel = ExplicitKernel(
        path3,
        {(): {(): 1}, (0,): {(): HALF, (0,): HALF}, (0, 0): {(0,): 1}},
    )

    result = check_irreducible(kernel, truncate(path3, 2))

    assert result == CounterexampleNode((0,), "no strict ancestor sends mass into the subtree")


def test_explicit_sample_step(path3):
    kernel = ExplicitKernel(path3, {(): {(0,): 1}, (0,): {(): 1}, (0, 0): {(0,): 1}})
    stream = UniformStream(1)

    assert kernel.sample_step(ROOT, stream) == (0,)
    assert kernel.sample_step(NodeWord((0, 0)), stream) == (0,)


def test_uniform_descendant_or_parent(path3):
    kernel = UniformDescendantOrParent(path3)

    assert kernel.parent_weight(NodeWord((0,))) == Fraction(1, 3)
    assert kernel.point_weight(NodeWord((0, 0)), NodeWord((0, 0))) == HALF
    assert validate_aud(kernel, truncate(path3, 2)) == []
    assert [kernel.closed_form_invariant(u) for u in path3.nodes] == [1, 2, 2]
    assert _stationary_defect(kernel, path3.nodes) == 0


def test_uniform_needs_finite_subtrees():
    kernel = UniformDescendantOrParent(line_tree())

    with pytest.raises(MissingCapabilityError):
        kernel.parent_weight(NodeWord((0,)))


def test_geometric_descendant(path3):
    kernel = GeometricDescendant(path3, "1/2")

    assert kernel.point_weight(ROOT, ROOT) == Fraction(2, 3)
    assert validate_aud(kernel, truncate(path3, 2)) == []
    assert kernel.closed_form_invariant(NodeWord((0,))) == Fraction(2, 3)
    assert _stationary_defect(kernel, path3.nodes) == 0
    assert kernel.describe() == {"family": "geometric", "p": "1/2"}


@pytest.mark.parametrize("p", ["0", "1", "3/2"])
def test_geometric_rejects_p(path3, p):
    with pytest.raises(DomainError):
        GeometricDescendant(path3, p)


def test_level_kernel_birth_death():
    level = LevelKernel.birth_death("1/3", "1/2")

    assert level.down(0) == 0
    assert level.weight(3, 2) == HALF
    assert level.weight(3, 4) == Fraction(1, 3)
    assert level.weight(3, 3) == Fraction(1, 6)
    assert level.invariant(1) == Fraction(2, 3)
    assert level.invariant(2) == Fraction(4, 9)


def test_level_kernel_rejects_bad_rows():
    with pytest.raises(SpecFormatError):
        LevelKernel([])

    with pytest.raises(SpecFormatError):
        LevelKernel([LevelRow(HALF, (HALF,))])

    with pytest.raises(SpecFormatError):
        LevelKernel([LevelRow(Fraction(0), (HALF,))])


def test_height_driven():
    kernel = HeightDriven(2, LevelKernel.birth_death("1/3", "1/2"))
    u = NodeWord((0, 1))

    assert kernel.point_weight(u, u) == Fraction(1, 6)
    assert kernel.point_weight(u, u.child(0)) == Fraction(1, 6)
    assert validate_aud(kernel, truncate(kernel.source, 3)) == []
    assert kernel.closed_form_level_sum(2) == Fraction(4, 9)
    assert kernel.closed_form_invariant(u) == Fraction(1, 9)
    assert kernel.shape_key(u) == kernel.shape_key(NodeWord((1, 1)))


def test_leaf_jump():
    kernel = LeafJump("1/2", 2)

    assert kernel.source.name == "comb"
    assert validate_aud(kernel, truncate(kernel.source, 4)) == []
    assert kernel.point_weight(ROOT, NodeWord((1,))) == Fraction(1, 4)
    assert kernel.point_weight(ROOT, ROOT) == HALF
    assert kernel.closed_form_invariant(NodeWord((0, 1))) == HALF
    assert kernel.closed_form_level_sum(2) == 1


def test_leaf_jump_eager_root():
    kernel = LeafJump("1/2", 2, lazy_root=False)

    assert kernel.point_weight(ROOT, ROOT) == 0
    assert kernel.point_weight(ROOT, NodeWord((1,))) == HALF
    assert validate_aud(kernel, truncate(kernel.source, 4)) == []

    with pytest.raises(DomainError):
        LeafJump("1", 2)


def test_random_walk_homogeneous():
    walk = RandomWalk.homogeneous(complete_tree(2), "9/23", "7/23")
    u = NodeWord((0,))

    assert walk.neighbors(ROOT).stay == Fraction(9, 23)
    assert walk.neighbors(u).stay == 0
    assert walk.point_weight(u, ROOT) == Fraction(9, 23)
    assert walk.closed_form_invariant(u) == Fraction(7, 9)
    assert walk.closed_form_level_sum(2) == 4 * Fraction(49, 81)
    assert walk.shape_key(u) == walk.shape_key(NodeWord((1,)))
    assert validate_aud(walk, truncate(walk.source, 3)) == []
    assert check_irreducible(walk, truncate(walk.source, 3))


def test_integer_walk():
    walk = RandomWalk.integer_walk("2/3")

    assert walk.family == KernelFamily.INTEGER_WALK
    assert walk.point_weight(NodeWord((0,)), ROOT) == Fraction(1, 3)
    assert walk.point_weight(NodeWord((1,)), ROOT) == Fraction(2, 3)
    assert walk.closed_form_invariant(NodeWord((0,))) == 2
    assert walk.closed_form_invariant(NodeWord((1, 0))) == Fraction(1, 4)
    assert walk.closed_form_level_sum(1) is None


def test_birth_death_walk():
    walk = RandomWalk.birth_death("1/3", "1/2")

    assert walk.family == KernelFamily.BIRTH_DEATH
    assert walk.point_weight(ROOT, ROOT) == Fraction(2, 3)
    assert walk.closed_form_level_sum(3) == Fraction(8, 27)


def test_random_walk_rejects_mismatched_rows():
    walk = RandomWalk(complete_tree(2), lambda u: NeighborWeights.balanced(0, (HALF,)))

    with pytest.raises(DomainError):
        walk.neighbors(ROOT)

    walk = RandomWalk(line_tree(), lambda u: NeighborWeights.balanced(HALF, (HALF,)))

    with pytest.raises(DomainError):
        walk.neighbors(ROOT)


def test_random_walk_sample_step():
    walk = RandomWalk.homogeneous(line_tree(), 1, 0)
    stream = UniformStream(3)

    assert walk.sample_step(NodeWord((0, 0)), stream) == (0,)


def test_degree_homogeneous(path3):
    walk = DegreeHomogeneous(
        path3,
        up=lambda k: HALF if k == 0 else Fraction(1, 4),
        per_child=lambda k: Fraction(1, 4),
    )

    assert walk.neighbors(ROOT) == NeighborWeights(0, (Fraction(1, 4),), Fraction(3, 4))
    assert walk.neighbors(NodeWord((0, 0))).stay == HALF
    assert validate_aud(walk, truncate(path3, 2)) == []
    assert _stationary_defect(walk, path3.nodes) == 0


def _ald_rows(weight_down):
    return {
        ROOT: {ROOT: HALF, NodeWord((0,)): HALF},
        NodeWord((0,)): {ROOT: 1 - weight_down, NodeWord((0, 0)): weight_down},
        NodeWord((0, 0)): {ROOT: HALF, NodeWord((0,)): HALF},
    }


def test_ald_kernel(path3):
    kernel = ExplicitAldKernel(path3, _ald_rows(HALF))

    assert kernel.point_weight(NodeWord((0, 0)), ROOT) == HALF
    assert validate_ald(kernel, truncate(path3, 2)) == []
    assert check_irreducible(kernel, truncate(path3, 2))


def test_ald_kernel_not_irreducible(path3):
    kernel = ExplicitAldKernel(path3, _ald_rows(Fraction(0)))

    result = check_irreducible(kernel, truncate(path3, 2))

    assert result.node == (0, 0)


def test_ald_off_support(path3):
    rows = _ald_rows(HALF)
    rows[NodeWord((0,))] = {NodeWord((0,)): HALF, NodeWord((0, 0)): HALF}
    rows[ROOT] = {NodeWord((0, 0)): 1}

    violations = validate_ald(ExplicitAldKernel(path3, rows), truncate(path3, 2))

    assert [violation.kind for violation in violations] == [ViolationKind.SUPPORT]


@given(small_kernels())
def test_random_kernels_are_valid(kernel):
    trunc = truncate(kernel.tree, kernel.tree.height)

    assert validate_aud(kernel, trunc) == []
    assert check_irreducible(kernel, trunc)
