"""Gateway error types. Each carries a machine-readable code."""

from __future__ import annotations


class GatewayError(Exception):
    code = "GATEWAY_ERROR"


class UnknownTemplateError(GatewayError):
    code = "UNKNOWN_TEMPLATE"


class MissingVariableError(GatewayError):
    code = "MISSING_VARIABLE"


class UnusedVariableError(GatewayError):
    code = "UNUSED_VARIABLE"


class ReplayMissError(GatewayError):
    """No recorded fixture for this request fingerprint."""

    code = "REPLAY_MISS"

    def __init__(self, fingerprint: str, template_id: str):
        super().__init__(f"no replay fixture for fingerprint {fingerprint} (template {template_id})")
        self.fingerprint = fingerprint
        self.template_id = template_id


class SchemaViolationError(GatewayError):
    code = "SCHEMA_VIOLATION"


class ProviderError(GatewayError):
    """Transport or provider-side failure."""

    code = "PROVIDER_ERROR"


class ProviderUnavailableError(ProviderError):
    code = "PROVIDER_UNAVAILABLE"


class EmptyTextError(GatewayError):
    code = "EMPTY_TEXT"
