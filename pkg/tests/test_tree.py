import pytest

from treechain.errors import DomainError, ResourceLimitError, SpecFormatError
from treechain.tree import (
    ROOT,
    EndDescription,
    FiniteTree,
    LazyTree,
    NodeWord,
    Ray,
    Truncation,
    Undetermined,
    comb_tree,
    complete_tree,
    detect_ends,
    line_tree,
    rays_tree,
    spine_tree,
    subtree_truncation,
    truncate,
)


def test_node_word():
    u = NodeWord.parse("0.1.2")

    assert u == (0, 1, 2)
    assert u.depth == 3
    assert u.parent == NodeWord((0, 1))
    assert u.child(4) == (0, 1, 2, 4)
    assert str(u) == "0.1.2"
    assert str(ROOT) == "∅"
    assert NodeWord.parse("∅") == ROOT
    assert ROOT.is_ancestor_of(u)
    assert u.is_ancestor_of(u)
    assert not u.is_ancestor_of(u.parent)
    assert ROOT.branch_successor(u) == (0,)
    assert u.ancestors() == [(), (0,), (0, 1), (0, 1, 2)]


@pytest.mark.parametrize("text", ["a", "0.x", "0.-1"])
def test_node_word_invalid(text):
    with pytest.raises(SpecFormatError):
        NodeWord.parse(text)


def test_node_word_root_has_no_parent():
    with pytest.raises(DomainError):
        ROOT.parent

    with pytest.raises(DomainError):
        NodeWord((0,)).branch_successor(NodeWord((1, 0)))


def test_from_counts():
    tree = FiniteTree.from_counts([3, 0, 0, 0])

    assert tree.nodes == ((), (0,), (1,), (2,))
    assert tree.height == 1
    assert tree.counts() == [3, 0, 0, 0]
    assert tree.leaves() == [(0,), (1,), (2,)]
    assert tree.subtree_size(ROOT) == 4


@pytest.mark.parametrize("counts", [[], [1, 0, 0], [-1], [2, 0]])
def test_from_counts_invalid(counts):
    with pytest.raises(SpecFormatError):
        FiniteTree.from_counts(counts)


def test_from_nodes(path3):
    tree = FiniteTree.from_nodes([(), (0,), (0, 0)])

    assert tree.counts() == path3.counts()

    with pytest.raises(SpecFormatError):
        FiniteTree.from_nodes([(), (1,)])

    with pytest.raises(SpecFormatError):
        FiniteTree.from_nodes([(), (0, 0)])

    with pytest.raises(SpecFormatError):
        FiniteTree.from_nodes([(0,)])


def test_subtree(path3):
    assert path3.subtree(NodeWord((0,))).counts() == [1, 0]
    assert path3.level_size(1) == 1
    assert path3.describe() == {"type": "finite", "children": [1, 1, 0]}


def test_finite_tree_unknown_node(path3):
    with pytest.raises(DomainError):
        path3.children(NodeWord((1,)))


def test_complete_tree():
    tree = complete_tree(2)

    assert tree.children(NodeWord((0, 1))) == [(0, 1, 0), (0, 1, 1)]
    assert tree.level_size(3) == 8
    assert len(truncate(tree, 2)) == 7
    assert tree.is_finite_subtree(ROOT) is False
    assert complete_tree(1).name == "line"


def test_comb_tree():
    tree = comb_tree(2)

    assert tree.child_count(ROOT) == 2
    assert tree.child_count(NodeWord((1,))) == 0
    assert tree.is_finite_subtree(NodeWord((1,))) is True
    assert tree.is_finite_subtree(NodeWord((0, 0))) is False
    assert tree.level_size(3) == 2
    assert len(truncate(tree, 3)) == 7
    assert tree.describe()["arity"] == 2


def test_spine_tree_decorations(path3):
    tree = spine_tree([path3])

    assert tree.child_count(ROOT) == 2
    assert tree.child_count(NodeWord((1,))) == 1
    assert tree.child_count(NodeWord((1, 0))) == 1
    assert tree.child_count(NodeWord((1, 0, 0))) == 0
    assert tree.level_size(2) == 3
    assert tree.subtree_size(NodeWord((1,))) == 3

    with pytest.raises(DomainError):
        tree.child_count(NodeWord((2,)))


def test_rays_tree_ends():
    tree = rays_tree(2)
    ends = detect_ends(tree)

    assert [ray.name for ray in ends.ends] == ["P+", "P-"]
    assert ends.sources == ((0,), (1,))
    assert ends.last_common_node(0, 1) == ROOT
    assert ends.core() == {ROOT}
    assert ends.excess_branching() == 1
    assert ends.skeleton_contains(NodeWord((1, 0, 0)))


def test_ray():
    ray = Ray((1,), (0,))

    assert ray.name == "1(0)*"
    assert ray.node(3) == (1, 0, 0)
    assert ray.passes_through(NodeWord((1, 0)))
    assert not ray.passes_through(NodeWord((0,)))
    assert ray.divergence_depth(Ray((1,), (0, 1))) == 2
    assert ray.divergence_depth(Ray((1,), (0, 0))) is None


def test_finite_ray_stops():
    ray = Ray((0, 1))

    assert ray.is_finite
    assert not ray.passes_through(NodeWord((0, 1, 0)))

    with pytest.raises(DomainError):
        ray.letter(2)


def test_end_description_needs_sources():
    with pytest.raises(DomainError):
        EndDescription((Ray((), (0,)),), ())


def test_detect_ends_declared_and_finite(path3):
    assert len(detect_ends(line_tree()).ends) == 1
    assert detect_ends(path3).ends == ()
    assert isinstance(detect_ends(complete_tree(3)), Undetermined)


def test_detect_ends_probe():
    def generator(u):
        if not u:
            return 2

        return 1 if u[0] == 0 else 0

    ends = detect_ends(LazyTree(generator), probe_depth=6)

    assert isinstance(ends, EndDescription)
    assert ends.probed
    assert len(ends.ends) == 1
    assert ends.ends[0].passes_through(NodeWord((0, 0, 0)))


def test_lazy_tree_rejects_bad_generator():
    with pytest.raises(DomainError):
        LazyTree(lambda u: -1).child_count(ROOT)


def test_truncation():
    trunc = truncate(complete_tree(2), 2)

    assert trunc.nodes[0] == ROOT
    assert trunc.level(2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert trunc.children(NodeWord((0, 0))) == []
    assert NodeWord((1, 1)) in trunc


def test_truncation_errors():
    with pytest.raises(DomainError):
        truncate(line_tree(), -1)

    with pytest.raises(ResourceLimitError):
        truncate(complete_tree(2), 10, cap=100)

    with pytest.raises(DomainError):
        Truncation.from_nodes(line_tree(), [(0,)])

    with pytest.raises(DomainError):
        Truncation.from_nodes(line_tree(), [(), (0, 0)])


def test_subtree_truncation():
    tree = complete_tree(2)

    assert subtree_truncation(tree, NodeWord((0,)), 1) == ()
    assert subtree_truncation(tree, NodeWord((0,)), 2) == ((0,),)
    assert subtree_truncation(tree, NodeWord((0,)), 3) == ((0,), (0, 0), (0, 1))
