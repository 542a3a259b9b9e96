"""Graph file formats and the synthetic ensemble generator.

Two interchange formats are supported: a CSV edge list (``source,target,
mark``) whose names resolve against a separately supplied variable set,
and a self-contained JSON document carrying variable metadata alongside
the edges. Serialization is canonical (edges sorted by normalized pair),
so parsing and re-serializing a normalized file is byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .graphs import Mark, MixedGraph, Variable, VariableSet
from .hashing import coin, unit_draw

CSV_HEADER = ["source", "target", "mark"]


class GraphParseError(ValueError):
    """A graph or variables file could not be read; names the location."""


def load_variables(path) -> VariableSet:
    """Read a JSON variables file: a list of {name, values?, description?}."""
    with open(path, encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise GraphParseError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(doc, dict):
        doc = doc.get("variables")
    if not isinstance(doc, list):
        raise GraphParseError(f"{path}: expected a list of variable entries")
    return _variables_from_entries(doc, str(path))


def _variables_from_entries(entries: list, where: str) -> VariableSet:
    variables = []
    for index, entry in enumerate(entries):
        if isinstance(entry, str):
            entry = {"name": entry}
        if not isinstance(entry, dict) or "name" not in entry:
            raise GraphParseError(f"{where}: variable entry {index} lacks a name")
        values = entry.get("values")
        variables.append(Variable(
            id=index,
            name=entry["name"],
            values=tuple(values) if values else None,
            description=entry.get("description"),
        ))
    try:
        return VariableSet(variables)
    except ValueError as exc:
        raise GraphParseError(f"{where}: {exc}") from exc


def parse_graph_file(path, variables: Optional[VariableSet] = None) -> MixedGraph:
    """Parse a graph file, dispatching on extension (.csv or .json)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return parse_graph_json(text, where=str(path))
    if variables is None:
        raise GraphParseError(f"{path}: CSV edge lists need a variables file")
    return parse_graph_csv(text, variables, where=str(path))


def parse_graph_csv(text: str, variables: VariableSet, where: str = "<csv>") -> MixedGraph:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or [cell.strip() for cell in rows[0]] != CSV_HEADER:
        raise GraphParseError(f"{where}:1: expected header 'source,target,mark'")
    graph = MixedGraph(variables)
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise GraphParseError(f"{where}:{lineno}: expected 3 fields, got {len(row)}")
        source, target, mark_text = (cell.strip() for cell in row)
        _add_parsed_edge(graph, source, target, mark_text, f"{where}:{lineno}")
    return graph


def parse_graph_json(text_or_doc, where: str = "<json>") -> MixedGraph:
    if isinstance(text_or_doc, str):
        try:
            doc = json.loads(text_or_doc)
        except json.JSONDecodeError as exc:
            raise GraphParseError(f"{where}: not valid JSON ({exc})") from exc
    else:
        doc = text_or_doc
    if not isinstance(doc, dict) or "variables" not in doc or "edges" not in doc:
        raise GraphParseError(f"{where}: expected an object with 'variables' and 'edges'")
    variables = _variables_from_entries(doc["variables"], where)
    graph = MixedGraph(variables)
    for index, edge in enumerate(doc["edges"]):
        if not isinstance(edge, (list, tuple)) or len(edge) != 3:
            raise GraphParseError(f"{where}: edge {index} must be [source, target, mark]")
        _add_parsed_edge(graph, edge[0], edge[1], edge[2], f"{where}: edge {index}")
    return graph


def _add_parsed_edge(graph: MixedGraph, source: str, target: str,
                     mark_text: str, location: str) -> None:
    try:
        mark = Mark.from_text(mark_text)
        graph.add_edge(graph.variables.id_of(source), graph.variables.id_of(target), mark)
    except (KeyError, ValueError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        raise GraphParseError(f"{location}: {message}") from exc


def serialize_graph_csv(graph: MixedGraph) -> str:
    names = graph.variables
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for mark, source, target in graph.edges():
        writer.writerow([names[source].name, names[target].name, mark.value])
    return out.getvalue()


def graph_to_json_doc(graph: MixedGraph) -> dict:
    variables = []
    for v in graph.variables:
        entry: dict = {"name": v.name}
        if v.values is not None:
            entry["values"] = list(v.values)
        if v.description is not None:
            entry["description"] = v.description
        variables.append(entry)
    names = graph.variables
    edges = [[names[s].name, names[t].name, mark.value] for mark, s, t in graph.edges()]
    return {"variables": variables, "edges": edges}


def serialize_graph_json(graph: MixedGraph) -> str:
    return json.dumps(graph_to_json_doc(graph), indent=2) + "\n"


def write_graph_file(graph: MixedGraph, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(serialize_graph_json(graph), encoding="utf-8")
    else:
        path.write_text(serialize_graph_csv(graph), encoding="utf-8")


@dataclass(frozen=True)
class PerturbationSpec:
    """Controls for deriving a noisy model ensemble from one truth graph."""

    delete_rate: float = 0.0
    reverse_rate: float = 0.0
    insert_rate: float = 0.0
    model_count: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("delete_rate", "reverse_rate", "insert_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.model_count < 1:
            raise ValueError("model_count must be at least 1")


def perturb(truth: MixedGraph, spec: PerturbationSpec) -> list[MixedGraph]:
    """Derive a synthetic ensemble by randomly editing copies of the truth.

    Per model: every true edge is dropped with ``delete_rate``, surviving
    directed edges are reversed with ``reverse_rate``, and every pair
    unconnected in the truth gains a random directed edge with
    ``insert_rate``. All draws hash (seed, model index, decision, pair), so
    adding models never changes earlier ones.
    """
    if not truth.directed_edges():
        raise ValueError("perturbation needs a truth with at least one directed edge")
    if spec.delete_rate == 1.0 and spec.insert_rate == 0.0:
        warnings.warn("every model will be empty: delete_rate is 1 and insert_rate is 0")
    names = truth.variables
    size = len(names)
    models = []
    for index in range(spec.model_count):
        model = MixedGraph(names)
        for mark, source, target in truth.edges():
            a, b = names[source].name, names[target].name
            if unit_draw(spec.seed, index, "delete", a, b) < spec.delete_rate:
                continue
            if mark is Mark.DIRECTED and \
                    unit_draw(spec.seed, index, "reverse", a, b) < spec.reverse_rate:
                source, target = target, source
            model.add_edge(source, target, mark)
        for x in range(size):
            for y in range(x + 1, size):
                if truth.has_connection(x, y):
                    continue
                a, b = names[x].name, names[y].name
                if unit_draw(spec.seed, index, "insert", a, b) < spec.insert_rate:
                    if coin(spec.seed, index, "direction", a, b):
                        model.add_edge(x, y, Mark.DIRECTED)
                    else:
                        model.add_edge(y, x, Mark.DIRECTED)
        models.append(model)
    return models
