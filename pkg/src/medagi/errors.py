"""Exception hierarchy shared by every module.

Each domain error carries an ``http_status`` so the gateway can map it without
a lookup table, and the CLI turns any ``MedagiError`` into exit code 1.
"""

from __future__ import annotations


class MedagiError(Exception):
    http_status = 500


# embedding
class EmptyInput(MedagiError):
    http_status = 422


class DegenerateEmbedding(MedagiError):
    http_status = 422


class DimensionMismatch(MedagiError):
    http_status = 500


class ZeroVector(MedagiError):
    http_status = 422


class ProviderFailure(MedagiError):
    http_status = 502


# registry
class DuplicateId(MedagiError):
    http_status = 409


class UnknownExpert(MedagiError):
    http_status = 404

    def __init__(self, expert_id: str):
        super().__init__(f"unknown expert: {expert_id!r}")
        self.expert_id = expert_id


class InvalidDescriptor(MedagiError):
    http_status = 422


class EmbeddingFailure(MedagiError):
    http_status = 422


class IoFailure(MedagiError):
    http_status = 500


class ParseFailure(MedagiError):
    http_status = 500


# selection
class EmptyRegistry(MedagiError):
    http_status = 503

    def __init__(self, message: str = "registry has no experts"):
        super().__init__(message)


class FingerprintMismatch(MedagiError):
    http_status = 500


# backbone ledger
class DuplicateComponent(MedagiError):
    http_status = 500


class UnknownAdapter(MedagiError):
    http_status = 500


class BudgetExhausted(MedagiError):
    http_status = 507


class DoubleRelease(MedagiError):
    http_status = 500


class NoComponents(MedagiError):
    http_status = 500


# gateway / eval
class BackendFailure(MedagiError):
    http_status = 502


class CorpusParseFailure(MedagiError):
    http_status = 500


class UnknownExpectedExpert(MedagiError):
    http_status = 500
