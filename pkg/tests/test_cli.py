import json
from fractions import Fraction

import pytest

from treechain.cli import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, main
from treechain.formats import read_measure_csv
from treechain.tree import ROOT, NodeWord


@pytest.fixture
def four_node_args(fixtures_dir) -> list[str]:
    return [
        "--tree",
        str(fixtures_dir / "four_node.json"),
        "--kernel",
        str(fixtures_dir / "four_node.kernel"),
    ]


def _result(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


def test_invariant_json(capsys, four_node_args):
    assert main(["invariant", *four_node_args, "--no-timestamp"]) == EXIT_OK

    document = _result(capsys)

    assert "timestamp" not in document["header"]
    assert document["header"]["config"]["command"] == "invariant"
    assert document["result"]["normalized"] is True
    assert document["result"]["measure"] == {
        "∅": "20/77",
        "0": "15/77",
        "1": "12/77",
        "2": "30/77",
    }


def test_invariant_csv(capsys, four_node_args):
    assert main(["invariant", *four_node_args, "--format", "csv", "--method", "leaf"]) == EXIT_OK

    measure = read_measure_csv(capsys.readouterr().out)

    assert measure[ROOT] == Fraction(20, 77)
    assert measure[NodeWord((2,))] == Fraction(30, 77)


def test_invariant_on_infinite_tree(capsys):
    args = ["invariant", "--tree", "line", "--kernel", "bd:down=1/2,up=1/3", "--depth", "3"]

    assert main(args) == EXIT_OK

    document = _result(capsys)

    assert document["result"]["normalized"] is False
    assert document["result"]["measure"]["∅"] == "1/1"
    assert len(document["result"]["measure"]) == 4


def test_hash_is_stable_across_jobs(capsys, four_node_args):
    main(["invariant", *four_node_args, "--no-timestamp"])
    first = _result(capsys)["header"]["config_hash"]
    main(["invariant", *four_node_args, "--no-timestamp", "--jobs", "2"])

    assert _result(capsys)["header"]["config_hash"] == first


def test_out_file(capsys, tmp_path, four_node_args):
    target = tmp_path / "pi.csv"

    assert main(["invariant", *four_node_args, "--format", "csv", "--out", str(target)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert read_measure_csv(target.read_text(encoding="utf-8"))[ROOT] == Fraction(20, 77)


def test_classify(capsys):
    args = ["classify", "--tree", "z", "--kernel", "zwalk", "--ends", "--h-max", "32"]

    assert main(args) == EXIT_OK

    result = _result(capsys)["result"]

    assert result["recurrence"]["outcome"] == "Transient"
    assert result["ends"]["children"]["P-"]["outcome"] == "PositiveRecurrent"


def test_classify_finite_tree(capsys, four_node_args):
    assert main(["classify", *four_node_args, "--format", "csv"]) == EXIT_OK

    text = capsys.readouterr().out

    assert "recurrence,Recurrent," in text
    assert "positive_recurrence,PositiveRecurrent," in text


def test_green(capsys):
    assert main(["green", "--dyck", "0.4"]) == EXIT_OK
    assert _result(capsys)["result"]["closed_form"] == pytest.approx(1.25)

    args = ["green", "--tree", "line", "--kernel", "bd:down=1/2,up=1/3", "--node", "0"]
    args += ["--x", "1", "--depth", "0"]

    assert main(args) == EXIT_OK
    assert _result(capsys)["result"]["value"] == "6/5"


def test_green_series_csv(capsys, four_node_args):
    args = ["green", *four_node_args, "--series", "3", "--depth", "1", "--format", "csv"]

    assert main(args) == EXIT_OK

    text = capsys.readouterr().out

    assert "n,coefficient\n0," in text
    assert "\n1,1/20\n" in text


def test_gw(capsys):
    args = ["gw", "--law", "0:1/2,2:1/2", "--F", "1/2", "--G", "2:1/4"]
    args += ["--simulate", "2", "--spine", "20"]

    assert main(args) == EXIT_OK

    result = _result(capsys)["result"]

    assert result["verdict"]["outcome"] == "PositiveRecurrent"
    assert result["slope"]["value"] == pytest.approx(result["slope"]["expected"])
    assert len(result["samples"]) == 2


def test_gw_classify_only(capsys):
    args = ["gw", "--law", "0:1/2,2:1/2", "--F", "1/2", "--G", "2:1/4", "--classify"]

    assert main(args) == EXIT_OK

    result = _result(capsys)["result"]

    assert result["verdict"]["outcome"] == "PositiveRecurrent"
    assert "samples" not in result


def test_gw_legacy_sample_flags(capsys):
    args = ["gw", "--law", "0:1/2,2:1/2", "--F", "1/2", "--G", "2:1/4"]
    args += ["--samples", "1", "--spine-length", "10"]

    assert main(args) == EXIT_OK
    assert len(_result(capsys)["result"]["samples"]) == 1


def test_gw_classify_excludes_simulate():
    args = ["gw", "--law", "0:1", "--F", "1/2", "--G", "1:1/4", "--classify", "--simulate", "2"]

    with pytest.raises(SystemExit):
        main(args)


def test_sb(capsys):
    assert main(["sb", "--encode", "0.1"]) == EXIT_OK
    assert _result(capsys)["result"]["rational"] == "3/2"

    assert main(["sb", "--decode", "3/2"]) == EXIT_OK
    assert _result(capsys)["result"]["word"] == "0.1"

    assert main(["sb", "--family", "r=0,l=0,p=1", "--start", "7/5", "--steps", "10"]) == EXIT_OK
    assert _result(capsys)["result"]["trajectory"]["first_return"] == 4


def test_oracle(capsys, four_node_args):
    assert main(["oracle", "stationary", *four_node_args]) == EXIT_OK
    assert _result(capsys)["result"]["measure"]["2"] == "30/77"

    assert main(["oracle", "paths", *four_node_args, "--max-length", "1", "--x", "1"]) == EXIT_OK
    assert _result(capsys)["result"]["value"] == "21/20"


def test_selftest(capsys):
    assert main(["selftest", "--quick", "--only", "four_node_fixture"]) == EXIT_OK

    result = _result(capsys)["result"]

    assert result["passed"] is True
    assert [check["name"] for check in result["checks"]] == ["four_node_fixture"]


def test_domain_error(capsys):
    assert main(["invariant", "--tree", "line", "--kernel", "bd:down=0"]) == EXIT_DOMAIN

    error = _result(capsys)

    assert error["error"] == "DomainError"


def test_usage_errors(capsys):
    assert main(["invariant", "--tree", "bogus", "--kernel", "uniform"]) == EXIT_USAGE
    assert main(["green", "--x", "1/2"]) == EXIT_USAGE
    assert capsys.readouterr().out == ""

    with pytest.raises(SystemExit) as info:
        main(["invariant", "--tree", "line"])

    assert info.value.code == EXIT_USAGE
