"""Small builders shared across the test modules."""

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

from cdensemble.experts import (
    EXISTENCE,
    Expert,
    PROV_SIMULATED,
    existence_answer,
    orientation_answer,
)
from cdensemble.graphs import Dag, Mark, MixedGraph, VariableSet
from cdensemble.hashing import coin


def make_vars(spec: str) -> VariableSet:
    return VariableSet.from_names(spec.split())


def mg(variables: VariableSet, *edges: str) -> MixedGraph:
    """Build a mixed graph from tokens like 'a->b', 'b--c', 'a<->d'."""
    graph = MixedGraph(variables)
    for token in edges:
        for mark in (Mark.BIDIRECTED, Mark.DIRECTED, Mark.UNDIRECTED):
            if mark.value in token:
                left, right = token.split(mark.value)
                graph.add_edge(variables.id_of(left), variables.id_of(right), mark)
                break
        else:
            raise ValueError(f"bad edge token {token!r}")
    return graph


def edge_names(dag: Dag) -> set[tuple[str, str]]:
    names = dag.variables
    return {(names[x].name, names[y].name) for x, y in dag.edges()}


def random_dag(variables: VariableSet, rng: random.Random, edge_prob: float = 0.3) -> MixedGraph:
    """Random DAG via a fixed topological order over the variable ids."""
    graph = MixedGraph(variables)
    size = len(variables)
    for i in range(size):
        for j in range(i + 1, size):
            if rng.random() < edge_prob:
                graph.add_edge(i, j, Mark.DIRECTED)
    return graph


def random_mixed_graph(variables: VariableSet, rng: random.Random,
                       edge_prob: float = 0.3) -> MixedGraph:
    """Random mixed graph: any mark, any direction, possibly cyclic."""
    graph = MixedGraph(variables)
    size = len(variables)
    for i in range(size):
        for j in range(i + 1, size):
            if rng.random() >= edge_prob:
                continue
            mark = rng.choice([Mark.DIRECTED, Mark.DIRECTED, Mark.UNDIRECTED, Mark.BIDIRECTED])
            if mark is Mark.DIRECTED and rng.random() < 0.5:
                graph.add_edge(j, i, mark)
            else:
                graph.add_edge(i, j, mark)
    return graph


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length))
        server = self.server
        server.requests.append({
            "payload": payload,
            "headers": dict(self.headers),
            "path": self.path,
        })
        status, reply = server.reply_fn(payload, len(server.requests))
        body = json.dumps(reply).encode() if isinstance(reply, dict) else reply.encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


class StubServer:
    """Throwaway chat-completions endpoint: reply_fn(payload, index)."""

    def __init__(self, reply_fn):
        self.httpd = HTTPServer(("127.0.0.1", 0), _StubHandler)
        self.httpd.reply_fn = reply_fn
        self.httpd.requests = []
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()

    @property
    def requests(self):
        return self.httpd.requests

    @property
    def base_url(self):
        host, port = self.httpd.server_address
        return f"http://{host}:{port}/v1"


def chat_reply(content):
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


class RandomAnswerExpert(Expert):
    """Deterministic noise expert: answers depend only on (seed, kind, pair).

    Safe to hand to two implementations and still count as one transcript,
    since any query gets the same answer no matter who asks or when.
    """

    def __init__(self, seed: int):
        self.seed = seed

    def answer(self, query):
        a, b = query.sorted_names()
        if query.kind == EXISTENCE:
            return existence_answer(coin(self.seed, "exist", a, b), PROV_SIMULATED)
        if coin(self.seed, "orient", a, b):
            parent, child = query.variables.id_of(a), query.variables.id_of(b)
        else:
            parent, child = query.variables.id_of(b), query.variables.id_of(a)
        return orientation_answer(parent, child, PROV_SIMULATED)
