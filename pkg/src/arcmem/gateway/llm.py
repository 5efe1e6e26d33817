"""Structured-output completion against a pluggable chat provider.

Three modes:
- live: call the provider, validating the response against the template's
  schema and retrying with a repair instruction on violation.
- record: live, plus the raw response is written as a fixture keyed by the
  request fingerprint.
- replay: answer from fixtures only; never touches the provider.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol

import jsonschema

from .errors import (
    ProviderError,
    ProviderUnavailableError,
    ReplayMissError,
    SchemaViolationError,
)
from .templates import TemplateCatalog

RETRY_BUDGET = 2
DEFAULT_MAX_TOKENS = 2000

_REPAIR_SUFFIX = (
    "\n\nYour previous answer was rejected: {error}\n"
    "Answer again with JSON that matches the requested shape exactly."
)

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)


@dataclass(frozen=True)
class LlmRequest:
    template_id: str
    rendered_text: str
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS
    # Convenience for scripted providers; not part of the fingerprint.
    variables: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class LlmResponse:
    raw_text: str
    parsed: Any
    provider_meta: dict


class ChatProvider(Protocol):
    name: str

    def complete(self, request: LlmRequest) -> str: ...


class NoProvider:
    """Placeholder provider for replay-only configurations."""

    name = "none"

    def complete(self, request: LlmRequest) -> str:
        raise ProviderUnavailableError("no chat provider configured")


class OpenAiCompatProvider:
    """Minimal client for an OpenAI-style chat completions endpoint.

    Endpoint and credentials come from the environment:
    ARCMEM_LLM_URL, ARCMEM_LLM_MODEL, ARCMEM_LLM_API_KEY.
    """

    name = "openai-compat"

    def __init__(self, base_url: str | None = None, model: str | None = None, api_key: str | None = None):
        self.base_url = base_url or os.environ.get("ARCMEM_LLM_URL", "")
        self.model = model or os.environ.get("ARCMEM_LLM_MODEL", "")
        self.api_key = api_key or os.environ.get("ARCMEM_LLM_API_KEY", "")
        if not self.base_url or not self.model:
            raise ProviderUnavailableError("ARCMEM_LLM_URL and ARCMEM_LLM_MODEL must be set for live mode")

    def complete(self, request: LlmRequest) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [{"role": "user", "content": request.rendered_text}],
        }
        try:
            resp = httpx.post(f"{self.base_url.rstrip('/')}/chat/completions", json=body, headers=headers, timeout=120)
            resp.raise_for_status()
            payload = resp.json()
            return payload["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise ProviderError(f"provider transport failure: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc


def fingerprint(template_id: str, version: int, rendered_text: str) -> str:
    """Stable request key: hash of template id, version, and rendered text."""
    payload = f"{template_id}\x1f{version}\x1f{rendered_text}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def parse_json_response(raw_text: str) -> Any:
    """Parse a model response as JSON, tolerating a code fence around it."""
    text = raw_text.strip()
    fenced = _FENCE_RE.match(text)
    if fenced:
        text = fenced.group(1).strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolationError(f"response is not valid JSON: {exc}") from exc


class LlmGateway:
    """Prompt rendering plus schema-validated completion with replay."""

    def __init__(
        self,
        fixtures_dir: str | Path,
        provider: ChatProvider | None = None,
        mode: str = "replay",
        catalog: TemplateCatalog | None = None,
        retry_budget: int = RETRY_BUDGET,
        temperature: float = 0.0,
    ):
        if mode not in ("live", "replay", "record"):
            raise ValueError(f"unknown gateway mode: {mode!r}")
        self.fixtures_dir = Path(fixtures_dir)
        self.provider = provider if provider is not None else NoProvider()
        self.mode = mode
        self.catalog = catalog if catalog is not None else TemplateCatalog()
        self.retry_budget = retry_budget
        self.temperature = temperature
        self.call_count = 0
        self._write_lock = threading.Lock()

    def render(self, template_id: str, variables: Mapping[str, str]) -> str:
        return self.catalog.render(template_id, variables)

    def fingerprint_for(self, template_id: str, variables: Mapping[str, str]) -> str:
        template = self.catalog.get(template_id)
        return fingerprint(template_id, template.version, self.render(template_id, variables))

    def complete(self, template_id: str, variables: Mapping[str, str], mode: str | None = None) -> LlmResponse:
        mode = mode or self.mode
        template = self.catalog.get(template_id)
        rendered = self.render(template_id, variables)
        request = LlmRequest(
            template_id=template_id,
            rendered_text=rendered,
            temperature=self.temperature,
            variables=dict(variables),
        )
        key = fingerprint(template_id, template.version, rendered)
        self.call_count += 1

        if mode == "replay":
            return self._replay(template, key)
        response = self._call_with_repair(template, request)
        if mode == "record":
            self._write_fixture(template, key, request, response)
        return response

    def complete_structured(self, template_id: str, variables: Mapping[str, str], mode: str | None = None) -> Any:
        return self.complete(template_id, variables, mode=mode).parsed

    def fixture_path(self, key: str) -> Path:
        return self.fixtures_dir / f"{key}.json"

    def _replay(self, template, key: str) -> LlmResponse:
        path = self.fixture_path(key)
        if not path.exists():
            raise ReplayMissError(key, template.template_id)
        data = json.loads(path.read_text("utf-8"))
        parsed = parse_json_response(data["raw_text"])
        jsonschema.validate(parsed, template.response_schema)
        return LlmResponse(raw_text=data["raw_text"], parsed=parsed, provider_meta={"mode": "replay", "fingerprint": key})

    def _call_with_repair(self, template, request: LlmRequest) -> LlmResponse:
        last_error: Exception | None = None
        prompt = request.rendered_text
        for attempt in range(self.retry_budget + 1):
            attempt_request = LlmRequest(
                template_id=request.template_id,
                rendered_text=prompt,
                temperature=request.temperature,
                max_tokens=request.max_tokens,
                variables=request.variables,
            )
            raw = self.provider.complete(attempt_request)
            try:
                parsed = parse_json_response(raw)
                jsonschema.validate(parsed, template.response_schema)
            except (SchemaViolationError, jsonschema.ValidationError) as exc:
                last_error = exc
                prompt = request.rendered_text + _REPAIR_SUFFIX.format(error=_one_line(str(exc)))
                continue
            return LlmResponse(
                raw_text=raw,
                parsed=parsed,
                provider_meta={"mode": "live", "provider": self.provider.name, "retries": attempt},
            )
        raise SchemaViolationError(
            f"response for template {template.template_id!r} failed schema validation "
            f"after {self.retry_budget} retries: {_one_line(str(last_error))}"
        )

    def _write_fixture(self, template, key: str, request: LlmRequest, response: LlmResponse) -> None:
        record = {
            "fingerprint": key,
            "template_id": template.template_id,
            "version": template.version,
            "rendered_text": request.rendered_text,
            "raw_text": response.raw_text,
        }
        with self._write_lock:
            self.fixtures_dir.mkdir(parents=True, exist_ok=True)
            self.fixture_path(key).write_text(json.dumps(record, indent=2, ensure_ascii=False) + "\n", "utf-8")


def _one_line(text: str, limit: int = 200) -> str:
    collapsed = " ".join(text.split())
    return collapsed[:limit]
