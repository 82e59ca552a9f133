"""Functions for reading tree and kernel specs and writing result artifacts"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from datetime import datetime, timezone
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
from crc import Calculator, Configuration

from . import __version__
from .arith import Number, format_number, is_exact, parse_number
from .const import KernelFamily, NumericMode, TreeFamily
from .errors import SpecFormatError
from .gw import HomogeneousWalkParams
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
from .tree import (
    ROOT,
    FiniteTree,
    NodeWord,
    Ray,
    TreeSource,
    comb_tree,
    complete_tree,
    line_tree,
    rays_tree,
    spine_tree,
)

_LOGGER = logging.getLogger(__name__)

crc_calculator = Calculator(
    Configuration(
        width=32,
        polynomial=0x04C11DB7,
        init_value=0xFFFFFFFF,
        final_xor_value=0xFFFFFFFF,
        reverse_input=True,
        reverse_output=True,
    )
)


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value

    if isinstance(value, Enum):
        return value.value

    if isinstance(value, Fraction):
        return format_number(value)

    if isinstance(value, (int, str)):
        return value

    if isinstance(value, NodeWord):
        return str(value)

    if isinstance(value, (float, np.floating)):
        return float(value)

    if isinstance(value, np.integer):
        return int(value)

    if isinstance(value, Mapping):
        return {str(_to_jsonable(key)): _to_jsonable(item) for key, item in value.items()}

    if isinstance(value, (list, tuple, set, frozenset, np.ndarray)):
        return [_to_jsonable(item) for item in value]

    if hasattr(value, "to_dict"):
        return _to_jsonable(value.to_dict())

    return str(value)


def canonical_json(mapping: Mapping[str, Any]) -> str:
    """Sorted keys, no whitespace: the form that gets hashed"""
    return json.dumps(_to_jsonable(mapping), sort_keys=True, separators=(",", ":"))


def config_hash(mapping: Mapping[str, Any]) -> str:
    """CRC-32 of the canonical JSON, as eight hex digits"""
    checksum = crc_calculator.checksum(canonical_json(mapping).encode("utf-8"))

    return f"{checksum:08x}"


def verify_config_hash(mapping: Mapping[str, Any], expected: str) -> bool:
    return crc_calculator.verify(canonical_json(mapping).encode("utf-8"), int(expected, 16))


def _split_shorthand(text: str) -> tuple[str, str]:
    name, _, arguments = text.strip().partition(":")

    return name.strip().lower(), arguments.strip()


def _keywords(arguments: str, allowed: Iterable[str]) -> dict[str, str]:
    """"up=9/23,down=7/23" into a dict, rejecting unknown keys"""
    allowed = set(allowed)
    result: dict[str, str] = {}

    for item in arguments.split(","):
        item = item.strip()

        if not item:
            continue

        key, sep, value = item.partition("=")
        key = key.strip()

        if not sep or key not in allowed:
            raise SpecFormatError(
                f"Unexpected argument {item!r}; expected one of {sorted(allowed)}"
            )

        result[key] = value.strip()

    return result


def _positive_int(text: str, what: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise SpecFormatError(f"{what} must be an integer, got {text!r}") from exc

    if value < 1:
        raise SpecFormatError(f"{what} must be positive, got {value}")

    return value


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"{path} is not valid JSON: {exc}") from exc


def _looks_like_path(text: str) -> bool:
    return text.endswith((".json", ".kernel", ".tree")) or "/" in text


def _parse_rays(items: Sequence[Mapping[str, Any]]) -> tuple[Ray, ...]:
    try:
        return tuple(
            Ray(tuple(item.get("prefix", ())), tuple(item.get("period", ())), item.get("label"))
            for item in items
        )
    except (AttributeError, TypeError) as exc:
        raise SpecFormatError(f"Bad end declaration: {exc}") from exc


def _counts(data: Any, what: str) -> list[int]:
    if not isinstance(data, Sequence) or isinstance(data, str):
        raise SpecFormatError(f"{what} must be a list of children counts")

    try:
        return [int(count) for count in data]
    except (TypeError, ValueError) as exc:
        raise SpecFormatError(f"{what} must be a list of children counts") from exc


def _lazy_tree_from_dict(data: Mapping[str, Any]) -> TreeSource:
    family = str(data.get("family", "")).lower()

    if family == TreeFamily.LINE:
        return line_tree()

    if family == TreeFamily.COMPLETE:
        return complete_tree(_positive_int(str(data.get("arity", 2)), "Arity"))

    if family == TreeFamily.COMB:
        return comb_tree(_positive_int(str(data.get("arity", 2)), "Arity"))

    if family == TreeFamily.RAYS:
        count = _positive_int(str(data.get("count", 2)), "Ray count")
        labels = None

        if "ends" in data:
            labels = [ray.label for ray in _parse_rays(data["ends"])]

            if len(labels) != count or not all(labels):
                labels = None

        return rays_tree(count, labels)

    if family == TreeFamily.SPINE:
        decorations = [
            FiniteTree.from_counts(_counts(item, "A decoration"))
            for item in data.get("decorations", ())
        ]

        return spine_tree(decorations)

    raise SpecFormatError(f"Unknown tree family {family!r}")


def tree_from_dict(data: Mapping[str, Any]) -> TreeSource:
    """{"type": "finite", "children": [...]} breadth-first counts, {"nodes": ["∅", "0", ...]}
    or {"type": "lazy", "family": "complete", "arity": 2}, plus optional "ends"

    "counts" is accepted for "children".
    """
    if not isinstance(data, Mapping):
        raise SpecFormatError("A tree spec must be a JSON object")

    kind = data.get("type")

    if kind not in (None, "finite", "lazy"):
        raise SpecFormatError(f"Unknown tree type {kind!r}")

    if kind == "lazy" or (kind is None and "family" in data):
        return _lazy_tree_from_dict(data)

    ends = _parse_rays(data["ends"]) if "ends" in data else None

    for key in ("children", "counts"):
        if key in data:
            return FiniteTree.from_counts(_counts(data[key], f"'{key}'"), ends=ends)

    if "nodes" in data:
        return FiniteTree.from_nodes(
            [NodeWord.parse(str(node)) for node in data["nodes"]], ends=ends
        )

    raise SpecFormatError("A finite tree spec needs 'children' or 'nodes'")


def parse_tree_spec(text: str) -> TreeSource:
    """A shorthand such as line, complete:2, z, rays:3, comb:2, spine[:1,0;0] or a JSON file"""
    if _looks_like_path(text):
        path = Path(text)

        if not path.is_file():
            raise SpecFormatError(f"Tree file {text} does not exist")

        return tree_from_dict(_read_json(path))

    name, arguments = _split_shorthand(text)

    if name == TreeFamily.LINE:
        return line_tree()

    if name == "z":
        return rays_tree(2)

    if name == TreeFamily.RAYS:
        return rays_tree(_positive_int(arguments or "2", "Ray count"))

    if name == TreeFamily.COMPLETE:
        return complete_tree(_positive_int(arguments or "2", "Arity"))

    if name == TreeFamily.COMB:
        return comb_tree(_positive_int(arguments or "2", "Arity"))

    if name == TreeFamily.SPINE:
        decorations = [
            FiniteTree.from_counts([int(count) for count in part.split(",")])
            for part in arguments.split(";")
            if part.strip()
        ]

        return spine_tree(decorations)

    raise SpecFormatError(f"Unknown tree spec {text!r}")


def _number(text: Any, mode: NumericMode) -> Number:
    value = parse_number(text if not isinstance(text, str) else text.strip(), mode)

    if mode == NumericMode.EXACT and not is_exact(value):
        raise SpecFormatError(f"{text!r} is not rational; exact mode needs rational inputs")

    return value


def kernel_from_dict(
    data: Mapping[str, Any], tree: TreeSource, mode: NumericMode = NumericMode.EXACT
) -> AudKernel:
    """{"family": "explicit", "rows": [[...]]} dense rows ("matrix" is an alias) or
    {"rows": {"∅": {"0": "1/2"}}} keyed by node
    """
    if not isinstance(data, Mapping):
        raise SpecFormatError("A kernel spec must be a JSON object")

    family = data.get("family", KernelFamily.EXPLICIT)

    if family != KernelFamily.EXPLICIT:
        arguments = ",".join(f"{key}={value}" for key, value in data.items() if key != "family")

        return parse_kernel_spec(f"{family}:{arguments}", tree, mode)

    if not isinstance(tree, FiniteTree):
        raise SpecFormatError("Explicit kernels need a finite tree")

    if "matrix" in data or isinstance(data.get("rows"), Sequence):
        dense = data["matrix"] if "matrix" in data else data["rows"]

        if not isinstance(dense, Sequence) or isinstance(dense, str) or not all(
            isinstance(row, Sequence) and not isinstance(row, str) for row in dense
        ):
            raise SpecFormatError("Dense kernel rows must be lists of weights")

        matrix = [[_number(value, mode) for value in row] for row in dense]

        return ExplicitKernel.from_dense(tree, matrix)

    if isinstance(data.get("rows"), Mapping):
        if not all(isinstance(row, Mapping) for row in data["rows"].values()):
            raise SpecFormatError("Keyed kernel rows must map nodes to weights")

        rows = {
            NodeWord.parse(u): {NodeWord.parse(v): _number(w, mode) for v, w in row.items()}
            for u, row in data["rows"].items()
        }

        return ExplicitKernel(tree, rows)

    raise SpecFormatError("An explicit kernel needs 'matrix' or 'rows'")


def parse_kernel_spec(
    text: str, tree: TreeSource | None, mode: NumericMode = NumericMode.EXACT
) -> AudKernel:
    """A family shorthand, e.g. bd:down=2/3 or rw:up=9/23,down=7/23, or a JSON file"""
    if _looks_like_path(text):
        path = Path(text)

        if not path.is_file():
            raise SpecFormatError(f"Kernel file {text} does not exist")

        if tree is None:
            raise SpecFormatError("A kernel file needs a tree")

        return kernel_from_dict(_read_json(path), tree, mode)

    name, arguments = _split_shorthand(text)

    def number(value: str) -> Number:
        return _number(value, mode)

    if name == KernelFamily.BIRTH_DEATH:
        values = _keywords(arguments, ("down", "up"))

        if "down" not in values:
            raise SpecFormatError("bd needs down=...")

        down = number(values["down"])
        up = number(values["up"]) if "up" in values else 1 - down

        return RandomWalk.birth_death(forward=up, backward=down)

    if name == KernelFamily.INTEGER_WALK:
        values = _keywords(arguments, ("forward",))

        return RandomWalk.integer_walk(number(values.get("forward", "2/3")))

    if tree is None:
        raise SpecFormatError(f"Kernel {name!r} needs a tree")

    if name == KernelFamily.RANDOM_WALK:
        values = _keywords(arguments, ("up", "down"))

        try:
            return RandomWalk.homogeneous(tree, number(values["up"]), number(values["down"]))
        except KeyError as exc:
            raise SpecFormatError(f"rw needs {exc.args[0]}=...") from exc

    if name == KernelFamily.UNIFORM:
        return UniformDescendantOrParent(tree)

    if name == KernelFamily.GEOMETRIC:
        values = _keywords(arguments, ("p",))

        return GeometricDescendant(tree, number(values.get("p", "1/2")))

    if name == KernelFamily.LEAF_JUMP:
        values = _keywords(arguments, ("p", "d", "lazy"))
        arity = int(values.get("d", tree.describe().get("arity", 2)))
        lazy = values.get("lazy", "1") not in ("0", "false", "no")

        return LeafJump(number(values.get("p", "1/2")), arity, tree, lazy_root=lazy)

    if name == KernelFamily.HEIGHT_DRIVEN:
        values = _keywords(arguments, ("d", "forward", "backward"))
        level = LevelKernel.birth_death(
            number(values.get("forward", "1/3")), number(values.get("backward", "1/2"))
        )

        return HeightDriven(_positive_int(values.get("d", "2"), "Arity"), level, tree)

    if name == KernelFamily.DEGREE_HOMOGENEOUS:
        values = _keywords(arguments, ("F", "G"))

        try:
            # degree-indexed values use ";" between pairs: G=1:1/3;2:1/4
            params = HomogeneousWalkParams.parse(
                values["F"].replace(";", ","), values["G"].replace(";", ",")
            )
        except KeyError as exc:
            raise SpecFormatError(f"homogeneous needs {exc.args[0]}=...") from exc

        return params.kernel(tree)

    raise SpecFormatError(f"Unknown kernel spec {text!r}")


def artifact_header(
    config: Mapping[str, Any], timestamp: bool = True, now: datetime | None = None
) -> dict[str, Any]:
    """Tool version, resolved config and its hash; the timestamp is optional"""
    header: dict[str, Any] = {
        "tool": "treechain",
        "version": __version__,
        "config_hash": config_hash(config),
        "config": _to_jsonable(config),
    }

    if timestamp:
        moment = now or datetime.now(timezone.utc)
        header["timestamp"] = moment.isoformat(timespec="seconds")

    return header


def measure_rows(measure: Mapping[NodeWord, Number]) -> list[dict[str, Any]]:
    """node, depth and value columns; rationals split into numerator and denominator"""
    rows = []
    nodes = sorted(measure, key=NodeWord.sort_key)
    exact = all(is_exact(measure[node]) for node in nodes)

    for node in nodes:
        value = measure[node]
        row: dict[str, Any] = {"node": str(node), "depth": len(node)}

        if exact:
            value = Fraction(value)
            row["value_num"] = value.numerator
            row["value_den"] = value.denominator
        else:
            row["value"] = repr(float(value))

        rows.append(row)

    return rows


def render_json(header: Mapping[str, Any], payload: Mapping[str, Any]) -> str:
    return json.dumps(
        {"header": _to_jsonable(header), "result": _to_jsonable(payload)},
        sort_keys=True,
        indent=2,
        ensure_ascii=False,
    ) + "\n"


def render_csv(header: Mapping[str, Any], rows: Sequence[Mapping[str, Any]]) -> str:
    """Header lines as '# key: value' comments, then the table"""
    buffer = io.StringIO()

    for key in sorted(header):
        value = header[key]
        text = canonical_json(value) if isinstance(value, Mapping) else str(value)
        buffer.write(f"# {key}: {text}\n")

    if rows:
        columns = list(rows[0])
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()

        for row in rows:
            writer.writerow({key: _csv_cell(row.get(key)) for key in columns})

    return buffer.getvalue()


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (Fraction, NodeWord, Enum)):
        return _to_jsonable(value)

    return value


def render(
    fmt: str,
    header: Mapping[str, Any],
    payload: Mapping[str, Any],
    rows: Sequence[Mapping[str, Any]] | None = None,
) -> str:
    """CSV needs rows; JSON carries the full payload"""
    if fmt == "csv":
        if rows is None:
            raise SpecFormatError("This result has no tabular form; use --format json")

        return render_csv(header, rows)

    if fmt == "json":
        return render_json(header, payload)

    raise SpecFormatError(f"Unknown output format {fmt!r}")


def read_measure_csv(text: str) -> dict[NodeWord, Number]:
    """Inverse of measure_rows after render_csv; comment lines are skipped"""
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    result: dict[NodeWord, Number] = {}

    for row in csv.DictReader(lines):
        node = NodeWord.parse(row["node"])

        if "value_num" in row:
            result[node] = Fraction(int(row["value_num"]), int(row["value_den"]))
        else:
            result[node] = float(row["value"])

    if ROOT not in result:
        _LOGGER.warning("Measure file has no root entry")

    return result
