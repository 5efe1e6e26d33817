"""Prompt templates: versioned text files plus response schemas.

Placeholders use ``{{name}}`` so literal JSON braces in the prompt text
stay untouched. Rendering is strict both ways: a missing variable and an
unused variable are both errors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping

from .errors import MissingVariableError, UnknownTemplateError, UnusedVariableError

_PLACEHOLDER_RE = re.compile(r"\{\{([a-z_][a-z0-9_]*)\}\}")

_ARC_TYPE_ENUM = ["anthology", "soap", "genre_specific"]

_STRING = {"type": "string", "minLength": 1}
_STRING_LIST = {"type": "array", "items": _STRING}
_NONEMPTY_STRING_LIST = {"type": "array", "items": _STRING, "minItems": 1}
_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 0}}


def _obj(properties: dict, required: list[str] | None = None) -> dict:
    return {
        "type": "object",
        "properties": properties,
        "required": sorted(properties) if required is None else required,
        "additionalProperties": False,
    }


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str
    response_schema: dict
    version: int

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self.text))


def _load_text(template_id: str) -> str:
    return resources.files("arcmem.gateway").joinpath(f"prompts/{template_id}.txt").read_text("utf-8")


def _template(template_id: str, schema: dict, version: int = 1) -> PromptTemplate:
    return PromptTemplate(
        template_id=template_id,
        text=_load_text(template_id),
        response_schema=schema,
        version=version,
    )


def build_catalog() -> dict[str, PromptTemplate]:
    """The shipped catalog: preprocessing, the extraction agents, commit
    adjudication, and progression drafting for the review UI."""
    draft_arc = _obj({"title": _STRING, "description": _STRING})
    serial_arc = _obj(
        {
            "title": _STRING,
            "description": _STRING,
            "arc_type": {"type": "string", "enum": ["soap", "genre_specific"]},
        }
    )
    return {
        t.template_id: t
        for t in [
            _template("simplify_sentences", _obj({"sentences": _NONEMPTY_STRING_LIST})),
            _template("resolve_pronouns", _obj({"resolved": _STRING})),
            _template(
                "refine_entities",
                _obj(
                    {
                        "characters": {
                            "type": "array",
                            "items": _obj({"surfaces": _NONEMPTY_STRING_LIST}),
                        }
                    }
                ),
            ),
            _template("agent2_anthology", _obj({"arcs": {"type": "array", "items": draft_arc}})),
            _template(
                "agent3_serial",
                _obj(
                    {
                        "new_arcs": {"type": "array", "items": serial_arc},
                        "validations": {
                            "type": "array",
                            "items": _obj({"arc_id": _STRING, "present": {"type": "boolean"}}),
                        },
                    }
                ),
            ),
            _template(
                "agent4_optimize",
                _obj(
                    {
                        "merges": {
                            "type": "array",
                            "items": _obj(
                                {
                                    "indices": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2},
                                    "title": _STRING,
                                    "description": _STRING,
                                }
                            ),
                        }
                    }
                ),
            ),
            _template(
                "agent5_deduplicate",
                _obj(
                    {
                        "duplicates": {
                            "type": "array",
                            "items": _obj(
                                {
                                    "indices": {
                                        "type": "array",
                                        "items": {"type": "integer", "minimum": 0},
                                        "minItems": 2,
                                        "maxItems": 2,
                                    },
                                    "keep_type": {"type": "string", "enum": _ARC_TYPE_ENUM},
                                },
                            ),
                        }
                    }
                ),
            ),
            _template(
                "agent6_enhance",
                _obj(
                    {
                        "main_characters": _NONEMPTY_STRING_LIST,
                        "interfering_characters": _STRING_LIST,
                        "utterances": _NONEMPTY_STRING_LIST,
                    }
                ),
            ),
            _template("agent7_verify_progressions", _obj({"keep": _INT_LIST})),
            _template(
                "agent8_verify_roles",
                _obj({"main_characters": _STRING_LIST, "interfering_characters": _STRING_LIST}),
            ),
            _template("agent9_final_review", _obj({"approved": _INT_LIST})),
            _template("same_storyline", _obj({"same_storyline": {"type": "boolean"}})),
            _template(
                "generate_progression",
                _obj({"utterances": _NONEMPTY_STRING_LIST, "interfering_characters": _STRING_LIST}),
            ),
        ]
    }


class TemplateCatalog:
    def __init__(self, templates: Mapping[str, PromptTemplate] | None = None):
        self._templates = dict(templates) if templates is not None else build_catalog()

    def __iter__(self):
        return iter(self._templates.values())

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplateError(f"unknown template: {template_id!r}") from None

    def render(self, template_id: str, variables: Mapping[str, str]) -> str:
        """Pure substitution; strict about missing and unused variables."""
        template = self.get(template_id)
        needed = template.placeholders()
        supplied = set(variables)
        missing = needed - supplied
        if missing:
            raise MissingVariableError(
                f"template {template_id!r} missing variables: {', '.join(sorted(missing))}"
            )
        unused = supplied - needed
        if unused:
            raise UnusedVariableError(
                f"template {template_id!r} got unused variables: {', '.join(sorted(unused))}"
            )
        return _PLACEHOLDER_RE.sub(lambda m: str(variables[m.group(1)]), template.text)
