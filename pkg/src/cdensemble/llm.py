"""LLM-backed expert: prompt rendering, transport, and verdict parsing.

Queries are rendered into fixed single-turn prompts that end by demanding
a one-letter verdict, sent to any chat-completions-compatible HTTP
endpoint, and parsed back into expert answers. The API key is read from an
environment variable and never written to logs or result files.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests

from .experts import (
    EXISTENCE,
    AnswerParseError,
    Expert,
    ExpertAnswer,
    ExpertQuery,
    ExpertTransportError,
    PROV_LLM,
    existence_answer,
    orientation_answer,
)

ORIENTATION_TEMPLATE = """\
We are currently constructing a causal graph for a dataset covering <dataset description>. You are an <expertise description>. Assume that there is a plausible causal relationship between the following two variables (possibly indirect). Your task is to determine the most plausible *causal ordering* between them. Causation may be direct or indirect (via unobserved or observed mediators).
The two variables under consideration are:
'<X>' with possible values <X values>, described as <X description>
'<Y>' with possible values <Y values>, described as <Y description>
Before answering, consider:
- Which variable is more plausibly upstream.
- Whether intervening on one would reasonably be expected to change the other.
- Whether one variable represents a more downstream outcome. Note that aggregated variables are downstream of (and directly caused by) what they aggregate.
- Whether either variable primarily serves as evidence of underlying processes rather than a driver.
<extra>A: '<X>' is a cause (possibly indirect) of '<Y>' (<X> ->* <Y>).
B: '<Y>' is a cause (possibly indirect) of '<X>' (<Y> ->* <X>).
Provide a brief causal analysis (2-4 sentences), then conclude with:
"The correct choice is: <A/B>"
"""

EXISTENCE_TEMPLATE = """\
We are currently constructing a causal graph for a dataset covering <dataset description>. You are an <expertise description>. Your task is to determine whether there is a plausible *causal relationship* between two variables. The relationship may be direct or indirect, and may involve unobserved mediators. You are not asked to determine direction at this stage.
The two variables under consideration are:
'<X>' with possible values <X values>, described as <X description>
'<Y>' with possible values <Y values>, described as <Y description>
Assume that:
- The true causal graph may include unobserved variables.
- Observed associations alone do not determine causal ordering.

Before answering, consider:
- Whether the variables are part of the same underlying (domain-relevant) mechanism.
- Whether there exists a specific, domain-supported causal mechanism by which changing one would plausibly alter the other, beyond general shared factors.
- Whether any observed association is more likely explained by confounding or selection effects.
- Whether the variables operate at compatible levels (e.g., trait vs symptom, background vs outcome).
- Whether the variables are better understood as parallel consequences of broader factors rather than causally linked to each other.

A: There is a plausible causal relationship between '<X>' and '<Y>'.
B: There is no meaningful causal relationship between '<X>' and '<Y>'; any association is likely due to shared causes or noise.
<extra>Provide a brief causal analysis (2-4 sentences), then conclude with:
"The correct choice is: <A/B>"
"""

_VERDICT = re.compile(
    r"the\s+correct\s+choice\s+is\s*[*_~\"'`]*\s*:\s*[*_~\"'`\s]*([AB])\b",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class VariableInfo:
    values: Optional[tuple[str, ...]] = None
    description: Optional[str] = None


@dataclass
class PromptContext:
    """Dataset framing and per-variable metadata substituted into prompts."""

    dataset_description: str
    expertise_description: str
    variables: dict[str, VariableInfo] = field(default_factory=dict)
    orientation_extra: Optional[str] = None
    existence_extra: Optional[str] = None

    @classmethod
    def from_json(cls, doc: dict) -> "PromptContext":
        variables = {}
        for entry in doc.get("variables", []):
            values = entry.get("values")
            variables[entry["name"]] = VariableInfo(
                tuple(values) if values else None, entry.get("description"))
        return cls(
            dataset_description=doc["dataset_description"],
            expertise_description=doc["expertise_description"],
            variables=variables,
            orientation_extra=doc.get("orientation_extra"),
            existence_extra=doc.get("existence_extra"),
        )

    @classmethod
    def from_file(cls, path) -> "PromptContext":
        with open(path, encoding="utf-8") as handle:
            return cls.from_json(json.load(handle))

    def info(self, name: str) -> VariableInfo:
        if not name:
            raise ValueError("variable names must be non-empty")
        return self.variables.get(name, VariableInfo())


def _values_text(info: VariableInfo) -> str:
    return ", ".join(info.values) if info.values else "unknown"


def _description_text(info: VariableInfo) -> str:
    return info.description if info.description else "unknown"


def _render(template: str, ctx: PromptContext, x: str, y: str, extra: Optional[str]) -> str:
    x_info, y_info = ctx.info(x), ctx.info(y)
    extra_block = extra.rstrip("\n") + "\n" if extra else ""
    text = template.replace("<dataset description>", ctx.dataset_description)
    text = text.replace("<expertise description>", ctx.expertise_description)
    text = text.replace("<X values>", _values_text(x_info))
    text = text.replace("<Y values>", _values_text(y_info))
    text = text.replace("<X description>", _description_text(x_info))
    text = text.replace("<Y description>", _description_text(y_info))
    text = text.replace("<X>", x)
    text = text.replace("<Y>", y)
    return text.replace("<extra>", extra_block)


def render_orientation_prompt(ctx: PromptContext, x: str, y: str) -> str:
    """Instantiate the orientation template with X = first argument."""
    return _render(ORIENTATION_TEMPLATE, ctx, x, y, ctx.orientation_extra)


def render_existence_prompt(ctx: PromptContext, x: str, y: str) -> str:
    """Instantiate the existence template with X = first argument."""
    return _render(EXISTENCE_TEMPLATE, ctx, x, y, ctx.existence_extra)


def parse_verdict(response_text: str) -> str:
    """Extract the final A/B verdict from a model reply.

    Takes the last occurrence of the verdict phrase so models that restate
    the options before concluding still parse. Quotes, whitespace and
    markdown emphasis around the phrase and the letter are tolerated.
    """
    matches = _VERDICT.findall(response_text)
    if not matches:
        raise AnswerParseError("no verdict phrase found in reply")
    return matches[-1].upper()


@dataclass
class LlmEndpointConfig:
    base_url: str
    model_name: str
    api_key_env_var: str = "OPENAI_API_KEY"
    request_timeout: float = 60.0
    max_retries: int = 3
    backoff_seconds: float = 0.5
    sampling: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, doc: dict) -> "LlmEndpointConfig":
        return cls(
            base_url=doc["base_url"],
            model_name=doc["model_name"],
            api_key_env_var=doc.get("api_key_env_var", "OPENAI_API_KEY"),
            request_timeout=doc.get("request_timeout", 60.0),
            max_retries=doc.get("max_retries", 3),
            backoff_seconds=doc.get("backoff_seconds", 0.5),
            sampling=doc.get("sampling", {}),
        )

    @classmethod
    def from_file(cls, path) -> "LlmEndpointConfig":
        with open(path, encoding="utf-8") as handle:
            return cls.from_json(json.load(handle))

    @property
    def expert_id(self) -> str:
        return f"llm:{self.model_name}"


class LlmExpert(Expert):
    """Single-turn chat expert over an HTTP JSON endpoint.

    Transport failures (connection errors, non-2xx statuses) are retried
    with exponential backoff up to ``max_retries`` extra attempts, then
    surface as transport errors. Replies that carry no verdict surface as
    parse errors, which the consistency wrapper treats as inconsistency.
    """

    def __init__(self, config: LlmEndpointConfig, context: PromptContext,
                 audit_path=None, session: Optional[requests.Session] = None):
        self.config = config
        self.context = context
        self.audit_path = Path(audit_path) if audit_path else None
        self.session = session or requests.Session()

    def answer(self, query: ExpertQuery) -> ExpertAnswer:
        x, y = query.x_name, query.y_name
        if query.kind == EXISTENCE:
            prompt = render_existence_prompt(self.context, x, y)
        else:
            prompt = render_orientation_prompt(self.context, x, y)
        started = time.monotonic()
        reply = self._chat(prompt)
        latency_ms = int((time.monotonic() - started) * 1000)
        try:
            choice = parse_verdict(reply)
        except AnswerParseError:
            self._audit(query, prompt, reply, None, latency_ms)
            raise
        self._audit(query, prompt, reply, choice, latency_ms)
        if query.kind == EXISTENCE:
            return existence_answer(choice == "A", PROV_LLM)
        if choice == "A":
            return orientation_answer(query.x, query.y, PROV_LLM)
        return orientation_answer(query.y, query.x, PROV_LLM)

    def _chat(self, prompt: str) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            **self.config.sampling,
        }
        headers = {}
        key = os.environ.get(self.config.api_key_env_var)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_error = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_seconds * 2 ** (attempt - 1))
            try:
                response = self.session.post(
                    url, json=payload, headers=headers,
                    timeout=self.config.request_timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code >= 400:
                raise ExpertTransportError(f"endpoint rejected request: HTTP {response.status_code}")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError) as exc:
                raise ExpertTransportError(f"malformed endpoint response: {exc}") from exc
        raise ExpertTransportError(f"retries exhausted: {last_error}")

    def _audit(self, query, prompt, reply, parsed, latency_ms) -> None:
        if self.audit_path is None:
            return
        record = {
            "query": {"kind": query.kind, "pair": list(query.sorted_names())},
            "prompt": prompt,
            "rawResponse": reply,
            "parsed": parsed,
            "latencyMs": latency_ms,
        }
        with open(self.audit_path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record) + "\n")
