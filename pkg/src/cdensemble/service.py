"""HTTP service that routes expert queries from a running averaging job to
a human and feeds the answers back in.

Each session owns one worker thread executing the averaging loop with an
expert that blocks on a condition variable whenever it needs an answer.
The loop is sequential by nature, so there is never more than one pending
query per session; clients poll for it, submit an answer, and the worker
resumes. Unanswered queries time the session out rather than guessing.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from .averaging import AveragingConfig, AveragingTrace, expert_model_average
from .experts import (
    EXISTENCE,
    Expert,
    ExpertAnswer,
    ExpertQuery,
    ExpertTimeoutError,
    PROV_HUMAN,
    count_expert_calls,
    existence_answer,
    orientation_answer,
)
from .graph_io import graph_to_json_doc, load_variables, parse_graph_file, parse_graph_json
from .graphs import Dag, GroundTruth, MixedGraph
from .metrics import score_graphs

STATUS_RUNNING = "running"
STATUS_WAITING = "waiting_for_answer"
STATUS_FINISHED = "finished"
STATUS_TIMED_OUT = "timed_out"
STATUS_FAILED = "failed"

DEFAULT_ANSWER_TIMEOUT = 15 * 60.0


@dataclass
class PendingQuery:
    query_id: int
    query: ExpertQuery


@dataclass
class Session:
    session_id: str
    description: str
    models: list[MixedGraph]
    config: AveragingConfig
    truth: Optional[GroundTruth] = None
    answer_timeout: float = DEFAULT_ANSWER_TIMEOUT

    status: str = STATUS_RUNNING
    pending: Optional[PendingQuery] = None
    answered: list[dict] = field(default_factory=list)
    result: Optional[dict] = None
    error: Optional[str] = None

    def __post_init__(self):
        self.condition = threading.Condition()
        self._next_query_id = itertools.count(1)
        self._submitted: Optional[ExpertAnswer] = None

    # --- worker side -----------------------------------------------------

    def ask(self, query: ExpertQuery) -> ExpertAnswer:
        """Publish a query, block until it is answered or times out."""
        with self.condition:
            pending = PendingQuery(next(self._next_query_id), query)
            self.pending = pending
            self.status = STATUS_WAITING
            self.condition.notify_all()
            answered = self.condition.wait_for(
                lambda: self._submitted is not None, timeout=self.answer_timeout)
            if not answered:
                self.pending = None
                self.status = STATUS_TIMED_OUT
                raise ExpertTimeoutError(
                    f"no answer for {query.describe()} within {self.answer_timeout:.0f}s")
            answer = self._submitted
            self._submitted = None
            self.status = STATUS_RUNNING
            return answer

    # --- client side -----------------------------------------------------

    def submit(self, query_id: int, payload: dict) -> None:
        with self.condition:
            if self.pending is None or self.pending.query_id != query_id:
                raise HTTPException(status_code=409, detail="no such pending query")
            query = self.pending.query
            answer = _parse_answer_payload(query, payload)
            self.answered.append({
                "query_id": query_id,
                "kind": query.kind,
                "pair": list(query.sorted_names()),
                "answer": _answer_payload(query, answer),
                "timestamp": time.time(),
            })
            self.pending = None
            self._submitted = answer
            self.condition.notify_all()

    def snapshot_pending(self) -> Optional[dict]:
        with self.condition:
            if self.pending is None:
                return None
            query = self.pending.query
            ctx = query.context
            view = {
                "query_id": self.pending.query_id,
                "kind": query.kind,
                "x": _variable_view(query.variables[query.x]),
                "y": _variable_view(query.variables[query.y]),
            }
            if ctx is not None:
                view["connection_count"] = ctx.connection
                view["n_models"] = ctx.n_models
                view["connection_share"] = ctx.connection / ctx.n_models
                view["oriented_share_xy"] = ctx.oriented_xy / ctx.connection
                view["oriented_share_yx"] = ctx.oriented_yx / ctx.connection
            return view


def _variable_view(variable) -> dict:
    return {
        "name": variable.name,
        "values": list(variable.values) if variable.values else None,
        "description": variable.description,
    }


def _parse_answer_payload(query: ExpertQuery, payload: dict) -> ExpertAnswer:
    if query.kind == EXISTENCE:
        accept = payload.get("accept")
        if not isinstance(accept, bool):
            raise HTTPException(status_code=400, detail="existence answer needs boolean 'accept'")
        return existence_answer(accept, PROV_HUMAN)
    names = {query.x_name: query.x, query.y_name: query.y}
    parent, child = payload.get("parent"), payload.get("child")
    if parent not in names or child not in names or parent == child:
        raise HTTPException(
            status_code=400,
            detail=f"orientation answer must order the pair {sorted(names)}")
    return orientation_answer(names[parent], names[child], PROV_HUMAN)


def _answer_payload(query: ExpertQuery, answer: ExpertAnswer) -> dict:
    if query.kind == EXISTENCE:
        return {"accept": answer.accept}
    return {
        "parent": query.variables[answer.parent].name,
        "child": query.variables[answer.child].name,
    }


class SessionExpert(Expert):
    def __init__(self, session: Session):
        self.session = session

    def answer(self, query: ExpertQuery) -> ExpertAnswer:
        return self.session.ask(query)


def _run_session(session: Session) -> None:
    try:
        dag, trace = expert_model_average(session.models, session.config,
                                          SessionExpert(session))
        result = _result_payload(session, dag, trace)
        with session.condition:
            session.result = result
            session.status = STATUS_FINISHED
            session.condition.notify_all()
    except ExpertTimeoutError as exc:
        with session.condition:
            session.error = str(exc)
            session.status = STATUS_TIMED_OUT
            session.condition.notify_all()
    except Exception as exc:  # surfaced via the result endpoint
        with session.condition:
            session.error = f"{type(exc).__name__}: {exc}"
            session.status = STATUS_FAILED
            session.condition.notify_all()


def _result_payload(session: Session, dag: Dag, trace: AveragingTrace) -> dict:
    payload = {
        "graph": graph_to_json_doc(dag.to_mixed_graph()),
        "trace": trace.to_json(),
        "expert_calls": count_expert_calls(trace),
        "metrics": None,
    }
    if session.truth is not None:
        report = score_graphs(session.truth.graph, dag.to_mixed_graph())
        payload["metrics"] = report.to_dict()
    return payload


def build_session_inputs(payload: dict) -> tuple[list[MixedGraph], Optional[GroundTruth]]:
    variables = None
    if payload.get("variables"):
        variables = load_variables(payload["variables"])
    models: list[MixedGraph] = []
    for doc in payload.get("models_inline", []):
        models.append(parse_graph_json(doc, where="models_inline"))
    for path in payload.get("models", []):
        models.append(parse_graph_file(path, variables))
    if not models:
        raise HTTPException(status_code=400, detail="session needs at least one model")
    truth = None
    if payload.get("truth_inline"):
        truth = GroundTruth(parse_graph_json(payload["truth_inline"], where="truth_inline"))
    elif payload.get("truth"):
        truth = GroundTruth(parse_graph_file(payload["truth"], variables))
    return models, truth


def create_app() -> FastAPI:
    app = FastAPI(title="cdensemble session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)
    registry_lock = threading.Lock()
    app.state.sessions = sessions

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.get("/healthz")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(payload: dict) -> dict:
        try:
            models, truth = build_session_inputs(payload)
            config = AveragingConfig(
                theta1=float(payload.get("theta1", 0.0)),
                theta2=float(payload.get("theta2", 0.7)),
                tie_break=payload.get("tie_break", "lexicographic"),
                seed=int(payload.get("seed", 0)),
            )
        except HTTPException:
            raise
        except (ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        with registry_lock:
            session_id = f"s{next(counter)}"
            session = Session(
                session_id=session_id,
                description=payload.get("job_description", ""),
                models=models,
                config=config,
                truth=truth,
                answer_timeout=float(payload.get("answer_timeout_seconds",
                                                 DEFAULT_ANSWER_TIMEOUT)),
            )
            sessions[session_id] = session
        worker = threading.Thread(target=_run_session, args=(session,), daemon=True)
        worker.start()
        return {"session_id": session_id, "status": session.status}

    @app.get("/sessions/{session_id}/pending")
    def pending(session_id: str) -> dict:
        session = get_session(session_id)
        with session.condition:
            history = list(session.answered)
            status = session.status
        return {
            "session_id": session_id,
            "status": status,
            "query": session.snapshot_pending(),
            "history": history,
        }

    @app.post("/sessions/{session_id}/answer")
    def answer(session_id: str, payload: dict) -> dict:
        session = get_session(session_id)
        query_id = payload.get("query_id")
        if not isinstance(query_id, int):
            raise HTTPException(status_code=400, detail="missing integer 'query_id'")
        session.submit(query_id, payload)
        return {"accepted": True, "query_id": query_id}

    @app.get("/sessions/{session_id}/result")
    def result(session_id: str) -> dict:
        session = get_session(session_id)
        with session.condition:
            if session.status in (STATUS_TIMED_OUT, STATUS_FAILED):
                raise HTTPException(status_code=409,
                                    detail=f"session {session.status}: {session.error}")
            if session.status != STATUS_FINISHED or session.result is None:
                raise HTTPException(status_code=409, detail="session still running")
            return {"session_id": session_id, "status": session.status, **session.result}

    @app.get("/sessions/{session_id}/trace")
    def trace(session_id: str) -> dict:
        session = get_session(session_id)
        with session.condition:
            return {
                "session_id": session_id,
                "status": session.status,
                "answered": list(session.answered),
            }

    return app


def serve(addr: str = "127.0.0.1:8000") -> None:
    import uvicorn

    host, _, port_text = addr.partition(":")
    uvicorn.run(create_app(), host=host or "127.0.0.1",
                port=int(port_text) if port_text else 8000, log_level="warning")
