"""The expert contract and the experts that are not backed by an LLM.

An expert answers two kinds of questions about a variable pair: whether a
connection should be accepted at all (existence) and which direction an
agreed connection should take (orientation). Implementations here cover
the ground-truth simulated expert, transcript replay, the dual-order
consistency wrapper with majority-vote fallback, and the pair-keyed answer
cache.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING, Optional

from .graphs import GroundTruth, VariableSet
from .hashing import coin, unit_draw

if TYPE_CHECKING:  # avoids a runtime import cycle with averaging
    from .averaging import AveragingTrace, EnsembleCounts

EXISTENCE = "existence"
ORIENTATION = "orientation"

PROV_SIMULATED = "simulated"
PROV_LLM = "llm"
PROV_HUMAN = "human"
PROV_FALLBACK = "fallback_majority_vote"
PROV_CACHE = "cache"


class ExpertError(RuntimeError):
    """Base class for expert failures."""


class ExpertTransportError(ExpertError):
    """A remote expert could not be reached."""


class AnswerParseError(ExpertError):
    """A remote expert's reply did not contain a usable verdict."""


class ExpertTimeoutError(ExpertError):
    """A human expert did not answer within the allowed time."""


class ReplayError(ExpertError):
    """A scripted transcript did not match the queries being replayed."""


class CacheError(ExpertError):
    """The answer cache file contains an unreadable record."""


@dataclass(frozen=True)
class QueryContext:
    """Ensemble counts snapshot attached to a query for display/fallback."""

    connection: int
    n_models: int
    oriented_xy: int
    oriented_yx: int


@dataclass(frozen=True)
class ExpertQuery:
    kind: str
    x: int
    y: int
    variables: VariableSet
    context: Optional[QueryContext] = None

    def __post_init__(self):
        if self.x == self.y:
            raise ValueError("a query needs two distinct variables")
        self.variables.check_id(self.x)
        self.variables.check_id(self.y)

    @property
    def x_name(self) -> str:
        return self.variables[self.x].name

    @property
    def y_name(self) -> str:
        return self.variables[self.y].name

    def sorted_names(self) -> tuple[str, str]:
        return tuple(sorted((self.x_name, self.y_name)))  # type: ignore[return-value]

    def swapped(self) -> "ExpertQuery":
        ctx = self.context
        if ctx is not None:
            ctx = QueryContext(ctx.connection, ctx.n_models, ctx.oriented_yx, ctx.oriented_xy)
        return ExpertQuery(self.kind, self.y, self.x, self.variables, ctx)

    def describe(self) -> str:
        return f"{self.kind} query for pair ({self.x_name}, {self.y_name})"


@dataclass(frozen=True)
class ExpertAnswer:
    kind: str
    provenance: str
    accept: Optional[bool] = None
    parent: Optional[int] = None
    child: Optional[int] = None

    def oriented_pair(self) -> tuple[int, int]:
        if self.parent is None or self.child is None:
            raise ValueError("not an orientation answer")
        return self.parent, self.child


def existence_answer(accept: bool, provenance: str) -> ExpertAnswer:
    return ExpertAnswer(EXISTENCE, provenance, accept=accept)


def orientation_answer(parent: int, child: int, provenance: str) -> ExpertAnswer:
    return ExpertAnswer(ORIENTATION, provenance, parent=parent, child=child)


class Expert:
    """Anything able to answer existence and orientation queries."""

    def answer(self, query: ExpertQuery) -> ExpertAnswer:
        raise NotImplementedError


class SimulatedExpert(Expert):
    """Ground-truth oracle that is right in a fixed fraction of cases.

    Answers are based on ancestral chains rather than direct edges: a
    connection is accepted when either variable reaches the other through
    directed edges, and orientations follow the chain direction. Noise is
    keyed on (seed, kind, unordered pair) so the same question always gets
    the same answer within a run, regardless of call order or argument
    order. Pairs with no chain either way get a seeded arbitrary
    orientation that ignores the correctness setting.
    """

    def __init__(self, truth: GroundTruth, correctness: float = 1.0, seed: int = 0):
        if not 0.0 <= correctness <= 1.0:
            raise ValueError("correctness must lie in [0, 1]")
        self.truth = truth
        self.correctness = correctness
        self.seed = seed

    def _correct_draw(self, kind: str, a: str, b: str) -> bool:
        return unit_draw(self.seed, kind, a, b) < self.correctness

    def answer(self, query: ExpertQuery) -> ExpertAnswer:
        x, y = query.x, query.y
        a, b = query.sorted_names()
        forward = self.truth.ancestor_of(x, y)
        backward = self.truth.ancestor_of(y, x)
        if query.kind == EXISTENCE:
            correct = forward or backward
            accept = correct if self._correct_draw(EXISTENCE, a, b) else not correct
            return existence_answer(accept, PROV_SIMULATED)
        if query.kind == ORIENTATION:
            if forward:
                parent, child = x, y
            elif backward:
                parent, child = y, x
            else:
                # No causal relation in the truth: arbitrary seeded pick,
                # anchored on names so both argument orders agree.
                first = query.variables.id_of(a)
                second = query.variables.id_of(b)
                if coin(self.seed, "arbitrary", a, b):
                    return orientation_answer(first, second, PROV_SIMULATED)
                return orientation_answer(second, first, PROV_SIMULATED)
            if not self._correct_draw(ORIENTATION, a, b):
                parent, child = child, parent
            return orientation_answer(parent, child, PROV_SIMULATED)
        raise ValueError(f"unknown query kind {query.kind!r}")


class ScriptedExpert(Expert):
    """Replays a transcript of recorded answers in order.

    Each record is a dict with ``kind``, ``pair`` (sorted names), and either
    ``accept`` or ``parent``/``child`` names, plus optional ``provenance``
    (defaults to human: hand-written transcripts are human answers).
    """

    def __init__(self, records: list[dict]):
        self._records = list(records)
        self._cursor = 0

    @classmethod
    def from_file(cls, path) -> "ScriptedExpert":
        with open(path, encoding="utf-8") as handle:
            records = json.load(handle)
        if not isinstance(records, list):
            raise ReplayError(f"{path}: transcript must be a JSON list")
        return cls(records)

    @property
    def remaining(self) -> int:
        return len(self._records) - self._cursor

    def answer(self, query: ExpertQuery) -> ExpertAnswer:
        if self._cursor >= len(self._records):
            raise ReplayError(f"transcript exhausted at {query.describe()}")
        record = self._records[self._cursor]
        self._cursor += 1
        return answer_from_record(record, query)


class KeyedTranscriptExpert(Expert):
    """Replays recorded answers keyed by (kind, pair), ignoring order.

    Useful when the same fixed answers must serve runs that ask different
    subsets of questions, e.g. threshold sweeps over one transcript.
    """

    def __init__(self, records: list[dict]):
        self._by_key: dict[tuple[str, str, str], dict] = {}
        for record in records:
            key = (record["kind"], *sorted(record["pair"]))
            self._by_key[key] = record

    def answer(self, query: ExpertQuery) -> ExpertAnswer:
        key = (query.kind, *query.sorted_names())
        record = self._by_key.get(key)
        if record is None:
            raise ReplayError(f"transcript has no answer for {query.describe()}")
        return answer_from_record(record, query)


def answer_from_record(record: dict, query: ExpertQuery) -> ExpertAnswer:
    """Turn one transcript record into an answer for the given query."""
    kind = record.get("kind")
    if kind != query.kind:
        raise ReplayError(f"transcript answers {kind!r} but run asked {query.describe()}")
    pair = tuple(sorted(record.get("pair", ())))
    if pair != query.sorted_names():
        raise ReplayError(
            f"transcript answers pair {pair} but run asked {query.describe()}"
        )
    provenance = record.get("provenance", PROV_HUMAN)
    if kind == EXISTENCE:
        accept = record.get("accept")
        if not isinstance(accept, bool):
            raise ReplayError(f"existence record for pair {pair} lacks a boolean 'accept'")
        return existence_answer(accept, provenance)
    names = {query.x_name: query.x, query.y_name: query.y}
    parent, child = record.get("parent"), record.get("child")
    if parent not in names or child not in names or parent == child:
        raise ReplayError(f"orientation record for pair {pair} names variables outside it")
    return orientation_answer(names[parent], names[child], provenance)


def record_from_answer(query: ExpertQuery, answer: ExpertAnswer) -> dict:
    """Transcript record for a (query, answer) pair; inverse of the above."""
    record = {"kind": query.kind, "pair": list(query.sorted_names()),
              "provenance": answer.provenance}
    if query.kind == EXISTENCE:
        record["accept"] = answer.accept
    else:
        record["parent"] = query.variables[answer.parent].name
        record["child"] = query.variables[answer.child].name
    return record


class ConsistencyWrapper(Expert):
    """Asks the inner expert in both argument orders and requires agreement.

    Inconsistent (or unparseable) replies fall back to a majority vote over
    the ensemble counts: existence is accepted only when more than half the
    models propose the connection, and orientation goes to the direction
    with the larger directed count (ties to the lexicographically first
    ordered pair). Transport failures are retried once per order before
    propagating.
    """

    def __init__(self, inner: Expert, counts: "EnsembleCounts"):
        self.inner = inner
        self.counts = counts

    def _attempt(self, query: ExpertQuery) -> Optional[ExpertAnswer]:
        for retry in (False, True):
            try:
                return self.inner.answer(query)
            except AnswerParseError:
                return None
            except ExpertTransportError:
                if retry:
                    raise
        return None  # unreachable

    def answer(self, query: ExpertQuery) -> ExpertAnswer:
        first = self._attempt(query)
        second = self._attempt(query.swapped())
        if first is not None and second is not None:
            if query.kind == EXISTENCE and first.accept == second.accept:
                return first
            if query.kind == ORIENTATION and first.oriented_pair() == second.oriented_pair():
                return first
        return self._fallback(query)

    def _fallback(self, query: ExpertQuery) -> ExpertAnswer:
        x, y = query.x, query.y
        if query.kind == EXISTENCE:
            share = Fraction(self.counts.connection_count(x, y), self.counts.n)
            return existence_answer(share > Fraction(1, 2), PROV_FALLBACK)
        forward = self.counts.oriented_count(x, y)
        backward = self.counts.oriented_count(y, x)
        if forward > backward:
            parent, child = x, y
        elif backward > forward:
            parent, child = y, x
        else:
            a, _ = query.sorted_names()
            parent = query.variables.id_of(a)
            child = y if parent == x else x
        return orientation_answer(parent, child, PROV_FALLBACK)


class AnswerCache:
    """Append-only JSON-lines store of answers keyed by (kind, pair, expert).

    Records survive process restarts; a fresh cache object pointed at the
    same file sees every previously persisted answer. Safe for concurrent
    readers and writers within a process; cross-process appends rely on
    single-write line appends.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._records: dict[tuple[str, str, str, str], dict] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    key = self._key(record["kind"], record["pair"], record["expertId"])
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CacheError(f"{self.path}:{lineno}: corrupt cache record ({exc})") from exc
                self._records[key] = record

    @staticmethod
    def _key(kind: str, pair, expert_id: str) -> tuple[str, str, str, str]:
        a, b = sorted(pair)
        return (kind, a, b, expert_id)

    def get(self, kind: str, pair, expert_id: str) -> Optional[dict]:
        with self._lock:
            return self._records.get(self._key(kind, pair, expert_id))

    def put(self, kind: str, pair, expert_id: str, record: dict) -> None:
        record = {"kind": kind, "pair": sorted(pair), "expertId": expert_id,
                  "timestamp": time.time(), **record}
        with self._lock:
            self._records[self._key(kind, pair, expert_id)] = record
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record, sort_keys=True) + "\n")

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


class CachedExpert(Expert):
    """Answers from the cache when possible, delegating on first sight.

    The key ignores argument order, so asking (a, b) after (b, a) is a hit;
    orientation answers are stored (parent, child) by name and re-expressed
    for the ids of the incoming query. Cache hits carry cache provenance.
    """

    def __init__(self, inner: Expert, cache: AnswerCache, expert_id: str):
        self.inner = inner
        self.cache = cache
        self.expert_id = expert_id

    def answer(self, query: ExpertQuery) -> ExpertAnswer:
        pair = query.sorted_names()
        record = self.cache.get(query.kind, pair, self.expert_id)
        if record is not None:
            flat = {"kind": record["kind"], "pair": record["pair"],
                    "provenance": record.get("provenance", PROV_CACHE),
                    **record.get("answer", {})}
            restored = answer_from_record(flat, query)
            return replace(restored, provenance=PROV_CACHE)
        answer = self.inner.answer(query)
        stored = record_from_answer(query, answer)
        self.cache.put(query.kind, pair, self.expert_id, {
            "answer": {k: v for k, v in stored.items()
                       if k not in ("kind", "pair", "provenance")},
            "provenance": answer.provenance,
        })
        return answer


def count_expert_calls(trace: "AveragingTrace") -> dict:
    """Tally non-cache expert invocations recorded in an averaging trace."""
    existence = orientation = 0
    for decision in trace.decisions:
        if decision.existence is not None and decision.existence.provenance != PROV_CACHE:
            existence += 1
        if decision.orientation is not None and decision.orientation.provenance != PROV_CACHE:
            orientation += 1
    return {
        "existence_calls": existence,
        "orientation_calls": orientation,
        "total": existence + orientation,
    }
