import json
from datetime import datetime, timezone
from fractions import Fraction

import pytest

from treechain import __version__
from treechain.const import NumericMode, TreeFamily
from treechain.errors import SpecFormatError
from treechain.formats import (
    artifact_header,
    canonical_json,
    config_hash,
    crc_calculator,
    kernel_from_dict,
    measure_rows,
    parse_kernel_spec,
    parse_tree_spec,
    read_measure_csv,
    render,
    render_csv,
    tree_from_dict,
    verify_config_hash,
)
from treechain.invariant import Measure
from treechain.kernel import DegreeHomogeneous, RandomWalk
from treechain.tree import ROOT, FiniteTree, NodeWord

FOUR_NODE_PI = {
    ROOT: Fraction(20, 77),
    NodeWord((0,)): Fraction(15, 77),
    NodeWord((1,)): Fraction(12, 77),
    NodeWord((2,)): Fraction(30, 77),
}


def test_crc_configuration():
    assert crc_calculator.checksum(b"123456789") == 0xCBF43926


def test_canonical_json():
    assert canonical_json({"b": Fraction(1, 2), "a": NodeWord((0, 1))}) == '{"a":"0.1","b":"1/2"}'
    assert (
        canonical_json({"mode": NumericMode.EXACT, "root": ROOT})
        == '{"mode":"exact","root":"∅"}'
    )


def test_config_hash():
    config = {"command": "invariant", "depth": 4, "tree": "line"}
    digest = config_hash(config)

    assert len(digest) == 8
    assert digest == config_hash(dict(reversed(list(config.items()))))
    assert digest != config_hash({**config, "depth": 5})
    assert verify_config_hash(config, digest)
    assert not verify_config_hash({**config, "depth": 5}, digest)


def test_parse_tree_shorthands():
    assert parse_tree_spec("line").name == TreeFamily.LINE
    assert parse_tree_spec("complete:3").child_count(ROOT) == 3
    assert parse_tree_spec("z").child_count(ROOT) == 2
    assert parse_tree_spec("rays:3").child_count(ROOT) == 3
    assert parse_tree_spec("comb:2").name == TreeFamily.COMB
    assert parse_tree_spec(" Complete ").child_count(ROOT) == 2

    spine = parse_tree_spec("spine:1,0;0")

    assert spine.child_count(ROOT) == 3
    assert spine.child_count(NodeWord((0, 1))) == 1
    assert spine.child_count(NodeWord((0, 1, 0))) == 0
    assert spine.child_count(NodeWord((0, 2))) == 0


@pytest.mark.parametrize("text", ["bogus", "complete:0", "rays:x", "missing.json"])
def test_parse_tree_errors(text):
    with pytest.raises(SpecFormatError):
        parse_tree_spec(text)


def test_tree_files(fixtures_dir):
    path3 = parse_tree_spec(str(fixtures_dir / "path3.json"))
    four = parse_tree_spec(str(fixtures_dir / "four_node.json"))

    assert isinstance(path3, FiniteTree)
    assert path3.nodes == (ROOT, NodeWord((0,)), NodeWord((0, 0)))
    assert len(four) == 4


def test_tree_from_dict():
    assert len(tree_from_dict({"counts": [1, 1, 0]})) == 3

    tree = tree_from_dict({"counts": [2, 0, 0], "ends": [{"prefix": [0]}]})

    assert tree.ends[0].prefix == (0,)

    with pytest.raises(SpecFormatError):
        tree_from_dict({})

    with pytest.raises(SpecFormatError):
        tree_from_dict([1, 0])


def test_finite_tree_documents():
    tree = tree_from_dict({"type": "finite", "children": [2, 1, 0, 0]})

    assert tree.nodes == (ROOT, NodeWord((0,)), NodeWord((1,)), NodeWord((0, 0)))
    assert tree_from_dict(tree.describe()).nodes == tree.nodes

    with pytest.raises(SpecFormatError):
        tree_from_dict({"type": "finite", "children": "2,1,0,0"})

    with pytest.raises(SpecFormatError):
        tree_from_dict({"type": "finite"})

    with pytest.raises(SpecFormatError):
        tree_from_dict({"type": "forest", "children": [0]})


def test_ends_survive_describe():
    tree = tree_from_dict({"children": [2, 0, 0], "ends": [{"prefix": [1], "label": "right"}]})
    again = tree_from_dict(json.loads(json.dumps(tree.describe())))

    assert again.ends == tree.ends
    assert again.ends[0].label == "right"


@pytest.mark.parametrize(
    "document,family,level",
    [
        ({"type": "lazy", "family": "complete", "arity": 3}, TreeFamily.COMPLETE, 9),
        ({"family": "line"}, TreeFamily.LINE, 1),
        ({"type": "lazy", "family": "rays", "count": 3}, TreeFamily.RAYS, 3),
        ({"type": "lazy", "family": "comb", "arity": 2}, TreeFamily.COMB, 2),
        ({"family": "spine", "decorations": [[1, 0]]}, TreeFamily.SPINE, 3),
    ],
)
def test_lazy_tree_documents(document, family, level):
    tree = tree_from_dict(document)

    assert tree.name == family
    assert tree.level_size(2) == level
    assert tree_from_dict(tree.describe()).describe() == tree.describe()


def test_lazy_tree_errors():
    with pytest.raises(SpecFormatError):
        tree_from_dict({"type": "lazy", "family": "bogus"})

    with pytest.raises(SpecFormatError):
        tree_from_dict({"type": "lazy", "family": "complete", "arity": 0})


def test_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")

    with pytest.raises(SpecFormatError):
        parse_tree_spec(str(path))


def test_parse_walk_kernels():
    birth_death = parse_kernel_spec("bd:down=1/3", None)

    assert birth_death.point_weight(NodeWord((0,)), ROOT) == Fraction(1, 3)
    assert birth_death.point_weight(NodeWord((0,)), NodeWord((0, 0))) == Fraction(2, 3)

    walk = parse_kernel_spec("rw:up=9/23,down=7/23", parse_tree_spec("complete:2"))

    assert isinstance(walk, RandomWalk)
    assert walk.point_weight(NodeWord((0,)), ROOT) == Fraction(9, 23)
    assert walk.point_weight(NodeWord((0,)), NodeWord((0, 1))) == Fraction(7, 23)

    integer = parse_kernel_spec("zwalk", None)

    assert integer.point_weight(ROOT, NodeWord((0,))) == Fraction(2, 3)


def test_parse_kernel_float_mode():
    kernel = parse_kernel_spec("bd:down=0.25", None, NumericMode.FLOAT)

    assert kernel.point_weight(NodeWord((0,)), ROOT) == 0.25
    assert isinstance(kernel.point_weight(NodeWord((0,)), ROOT), float)


def test_parse_family_kernels(path3):
    binary = parse_tree_spec("complete:2")

    assert isinstance(parse_kernel_spec("homogeneous:F=1/2,G=2:1/4", binary), DegreeHomogeneous)
    assert parse_kernel_spec("geometric:p=1/3", path3).describe()["family"] == "geometric"
    assert parse_kernel_spec("uniform", path3).describe()["family"] == "uniform"
    assert parse_kernel_spec("height:d=2", binary).describe()["arity"] == 2
    assert parse_kernel_spec("leafjump:p=1/4,d=2", binary).describe()["family"] == "leafjump"


@pytest.mark.parametrize(
    "text,tree",
    [
        ("bd", None),
        ("bd:bogus=1", None),
        ("bd:down=x", None),
        ("rw:up=1/2", "complete:2"),
        ("uniform", None),
        ("nope", "line"),
        ("missing.kernel", "line"),
    ],
)
def test_parse_kernel_errors(text, tree):
    source = parse_tree_spec(tree) if tree else None

    with pytest.raises(SpecFormatError):
        parse_kernel_spec(text, source)


def test_kernel_files(fixtures_dir, four_node_matrix):
    tree = parse_tree_spec(str(fixtures_dir / "four_node.json"))
    kernel = parse_kernel_spec(str(fixtures_dir / "four_node.kernel"), tree)

    assert kernel.dense() == four_node_matrix

    with pytest.raises(SpecFormatError):
        parse_kernel_spec(str(fixtures_dir / "four_node.kernel"), None)


def test_kernel_from_dict():
    tree = FiniteTree.from_counts([1, 0])
    rows = {"∅": {"∅": "1/2", "0": "1/2"}, "0": {"∅": "1"}}
    kernel = kernel_from_dict({"rows": rows}, tree)

    assert kernel.point_weight(ROOT, ROOT) == Fraction(1, 2)
    assert kernel.point_weight(NodeWord((0,)), ROOT) == 1

    delegated = kernel_from_dict({"family": "bd", "down": "1/3"}, parse_tree_spec("line"))

    assert delegated.point_weight(NodeWord((0,)), ROOT) == Fraction(1, 3)

    with pytest.raises(SpecFormatError):
        kernel_from_dict({"family": "explicit"}, tree)

    with pytest.raises(SpecFormatError):
        kernel_from_dict({"matrix": [[1]]}, parse_tree_spec("line"))


def test_dense_kernel_rows(four_node):
    tree = FiniteTree.from_counts([1, 0])
    kernel = kernel_from_dict({"family": "explicit", "rows": [["0", "1"], ["1", "0"]]}, tree)

    assert kernel.point_weight(ROOT, NodeWord((0,))) == 1
    assert kernel.point_weight(NodeWord((0,)), ROOT) == 1

    again = kernel_from_dict(json.loads(json.dumps(four_node.describe())), four_node.tree)

    assert again.dense() == four_node.dense()


@pytest.mark.parametrize(
    "rows",
    ["0,1;1,0", [["0", "1"], "1,0"], {"∅": "1"}, 5],
)
def test_malformed_kernel_rows(rows):
    with pytest.raises(SpecFormatError):
        kernel_from_dict({"family": "explicit", "rows": rows}, FiniteTree.from_counts([1, 0]))


def test_artifact_header():
    moment = datetime(2024, 5, 1, 12, 0, 30, tzinfo=timezone.utc)
    header = artifact_header({"command": "sb"}, now=moment)

    assert header["tool"] == "treechain"
    assert header["version"] == __version__
    assert header["config_hash"] == config_hash({"command": "sb"})
    assert header["timestamp"] == "2024-05-01T12:00:30+00:00"
    assert "timestamp" not in artifact_header({"command": "sb"}, timestamp=False)


def test_measure_rows():
    rows = measure_rows(FOUR_NODE_PI)

    assert rows[0] == {"node": "∅", "depth": 0, "value_num": 20, "value_den": 77}
    assert [row["node"] for row in rows] == ["∅", "0", "1", "2"]

    floats = measure_rows({ROOT: 0.5, NodeWord((0,)): 0.25})

    assert floats[1] == {"node": "0", "depth": 1, "value": "0.25"}


def test_csv_artifact_reads_back():
    header = artifact_header({"command": "invariant"}, timestamp=False)
    text = render_csv(header, measure_rows(FOUR_NODE_PI))

    assert text.startswith("# config: ")
    assert "node,depth,value_num,value_den\n" in text
    assert read_measure_csv(text) == FOUR_NODE_PI


def test_render():
    header = artifact_header({"command": "invariant"}, timestamp=False)
    measure = Measure(FOUR_NODE_PI)
    document = json.loads(render("json", header, {"measure": measure, "value": Fraction(1, 3)}))

    assert document["header"]["tool"] == "treechain"
    assert document["result"]["measure"]["2"] == "30/77"
    assert document["result"]["value"] == "1/3"

    with pytest.raises(SpecFormatError):
        render("csv", header, {}, None)

    with pytest.raises(SpecFormatError):
        render("xml", header, {})
