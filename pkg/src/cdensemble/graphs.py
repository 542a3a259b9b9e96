"""Variable registry and the graph types shared across the package.

Candidate models coming out of structure learners are *mixed* graphs: an
edge may be directed, undirected, or bidirected, and nothing stops a
learner from emitting directed cycles. The consensus output is a ``Dag``
whose acyclicity is checked on every insertion. Ground truths additionally
carry a precomputed ancestor relation used by the simulated expert.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence


class CycleError(ValueError):
    """Raised when an edge insertion would close a directed cycle."""


class Mark(Enum):
    DIRECTED = "->"
    UNDIRECTED = "--"
    BIDIRECTED = "<->"

    @classmethod
    def from_text(cls, text: str) -> "Mark":
        for mark in cls:
            if mark.value == text:
                return mark
        raise ValueError(f"unknown edge mark {text!r} (expected ->, -- or <->)")


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    values: Optional[tuple[str, ...]] = None
    description: Optional[str] = None


class VariableSet:
    """Ordered registry of named variables; ids are list positions.

    Two variable sets compare equal when they hold the same names in the
    same order; per-variable metadata (values, descriptions) only feeds
    prompts and displays and is ignored by equality.
    """

    def __init__(self, variables: Iterable[Variable | str]):
        self._variables: list[Variable] = []
        self._index: dict[str, int] = {}
        for item in variables:
            if isinstance(item, str):
                item = Variable(id=len(self._variables), name=item)
            if not item.name:
                raise ValueError("variable names must be non-empty")
            if item.name in self._index:
                raise ValueError(f"duplicate variable name {item.name!r}")
            if item.id != len(self._variables):
                item = Variable(len(self._variables), item.name, item.values, item.description)
            self._index[item.name] = item.id
            self._variables.append(item)
        if not self._variables:
            raise ValueError("a variable set needs at least one variable")

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "VariableSet":
        return cls(names)

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def __getitem__(self, var_id: int) -> Variable:
        return self._variables[var_id]

    def __len__(self) -> int:
        return len(self._variables)

    def __iter__(self) -> Iterator[Variable]:
        return iter(self._variables)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self._variables)

    def check_id(self, var_id: int) -> int:
        if not isinstance(var_id, int) or not 0 <= var_id < len(self._variables):
            raise ValueError(f"invalid variable id {var_id!r}")
        return var_id

    def __eq__(self, other) -> bool:
        return isinstance(other, VariableSet) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"VariableSet({list(self.names)!r})"


# An edge is stored as (mark, source id, target id); undirected and
# bidirected edges are normalized so source < target.
Edge = tuple[Mark, int, int]


class MixedGraph:
    """A candidate causal model: at most one edge of any mark per pair."""

    def __init__(self, variables: VariableSet):
        self.variables = variables
        self._edges: dict[tuple[int, int], Edge] = {}

    def add_edge(self, source: int, target: int, mark: Mark = Mark.DIRECTED) -> None:
        self.variables.check_id(source)
        self.variables.check_id(target)
        if source == target:
            raise ValueError(f"self-loop on variable {self.variables[source].name!r}")
        key = (min(source, target), max(source, target))
        if key in self._edges:
            a, b = self.variables[key[0]].name, self.variables[key[1]].name
            raise ValueError(f"pair ({a}, {b}) already has an edge")
        if mark is not Mark.DIRECTED:
            source, target = key
        self._edges[key] = (mark, source, target)

    def edge_between(self, x: int, y: int) -> Optional[Edge]:
        return self._edges.get((min(x, y), max(x, y)))

    def has_connection(self, x: int, y: int) -> bool:
        return (min(x, y), max(x, y)) in self._edges

    def edges(self) -> list[Edge]:
        """Edges sorted by normalized pair, a canonical iteration order."""
        return [self._edges[key] for key in sorted(self._edges)]

    def directed_edges(self) -> list[tuple[int, int]]:
        return [(s, t) for mark, s, t in self.edges() if mark is Mark.DIRECTED]

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def copy(self) -> "MixedGraph":
        g = MixedGraph(self.variables)
        g._edges = dict(self._edges)
        return g

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MixedGraph)
            and self.variables == other.variables
            and self._edges == other._edges
        )

    def __repr__(self):
        names = self.variables
        parts = [f"{names[s].name}{m.value}{names[t].name}" for m, s, t in self.edges()]
        return f"MixedGraph({', '.join(parts)})"


class Dag:
    """Directed acyclic graph; every mutation preserves acyclicity."""

    def __init__(self, variables: VariableSet):
        self.variables = variables
        self._children: dict[int, set[int]] = {v.id: set() for v in variables}
        self._parents: dict[int, set[int]] = {v.id: set() for v in variables}
        self._edges: set[tuple[int, int]] = set()

    def edge_creates_cycle(self, x: int, y: int) -> bool:
        """True iff y already reaches x, so adding x -> y would close a cycle."""
        self.variables.check_id(x)
        self.variables.check_id(y)
        if x == y:
            raise ValueError("self-loops are not part of the model")
        stack = [y]
        seen = {y}
        while stack:
            node = stack.pop()
            if node == x:
                return True
            for child in self._children[node]:
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return False

    def has_edge(self, x: int, y: int) -> bool:
        return (x, y) in self._edges

    def add_edge(self, x: int, y: int) -> None:
        self.variables.check_id(x)
        self.variables.check_id(y)
        if x == y:
            raise ValueError("self-loops are not part of the model")
        if (x, y) in self._edges:
            raise ValueError(f"edge {self._label(x, y)} already present")
        if (y, x) in self._edges:
            raise ValueError(f"antiparallel edge {self._label(y, x)} already present")
        if self.edge_creates_cycle(x, y):
            raise CycleError(f"adding {self._label(x, y)} would create a cycle")
        self._edges.add((x, y))
        self._children[x].add(y)
        self._parents[y].add(x)

    def _label(self, x: int, y: int) -> str:
        return f"{self.variables[x].name}->{self.variables[y].name}"

    def edges(self) -> list[tuple[int, int]]:
        return sorted(self._edges)

    def parents(self, node: int) -> set[int]:
        return set(self._parents[node])

    def children(self, node: int) -> set[int]:
        return set(self._children[node])

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def topological_order(self) -> list[int]:
        """Kahn's algorithm; raises CycleError if no order exists."""
        indegree = {v.id: len(self._parents[v.id]) for v in self.variables}
        ready = sorted(node for node, deg in indegree.items() if deg == 0)
        order: list[int] = []
        while ready:
            node = ready.pop()
            order.append(node)
            for child in self._children[node]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    ready.append(child)
        if len(order) != len(self.variables):
            raise CycleError("graph has no topological order")
        return order

    def to_mixed_graph(self) -> MixedGraph:
        g = MixedGraph(self.variables)
        for x, y in self.edges():
            g.add_edge(x, y, Mark.DIRECTED)
        return g

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dag)
            and self.variables == other.variables
            and self._edges == other._edges
        )

    def __repr__(self):
        parts = [self._label(x, y) for x, y in self.edges()]
        return f"Dag({', '.join(parts)})"


class GroundTruth:
    """A reference graph plus the ancestor relation of its directed part.

    The ancestor closure is built once from directed edges only; bidirected
    edges (latent confounding) contribute no ancestral paths.
    """

    def __init__(self, graph: MixedGraph):
        self.graph = graph
        self._closure = self._build_closure()

    def _build_closure(self) -> frozenset[tuple[int, int]]:
        children: dict[int, list[int]] = {v.id: [] for v in self.graph.variables}
        for source, target in self.graph.directed_edges():
            children[source].append(target)
        closure = set()
        for start in children:
            stack = list(children[start])
            seen = set()
            while stack:
                node = stack.pop()
                if node in seen:
                    continue
                seen.add(node)
                if node != start:
                    closure.add((start, node))
                stack.extend(children[node])
        return frozenset(closure)

    @property
    def variables(self) -> VariableSet:
        return self.graph.variables

    def ancestor_of(self, x: int, y: int) -> bool:
        """True iff a chain of directed edges leads from x to y."""
        self.graph.variables.check_id(x)
        self.graph.variables.check_id(y)
        return (x, y) in self._closure

    def related(self, x: int, y: int) -> bool:
        """True iff a directed chain exists in either direction."""
        return self.ancestor_of(x, y) or self.ancestor_of(y, x)
