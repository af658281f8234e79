"""Exception hierarchy shared by every hintforge module."""

from __future__ import annotations


class HintforgeError(Exception):
    """Base class for all errors raised by the package."""


# source_model
class ParseUnsupported(HintforgeError):
    pass


class InvalidEncoding(HintforgeError):
    pass


class PositionMismatch(HintforgeError):
    pass


class SiteNotFound(HintforgeError):
    pass


class AmbiguousSite(HintforgeError):
    pass


# knowledge_base
class MalformedDoc(HintforgeError):
    pass


class KBIoError(HintforgeError):
    pass


class SchemaVersionMismatch(HintforgeError):
    pass


class UnknownHint(HintforgeError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


# plan_model
class JsonSyntaxError(HintforgeError):
    pass


class SchemaViolation(HintforgeError):
    pass


class AllItemsInvalid(HintforgeError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# llm_gateway
class BackendUnavailable(HintforgeError):
    pass


class BudgetExceeded(HintforgeError):
    pass


class TransportError(HintforgeError):
    """A single backend request failed; retried by the gateway."""


# hint_applier
class OverlappingInsertions(HintforgeError):
    pass


class CorruptProvenance(HintforgeError):
    pass


# profiler
class CompilerNotFound(HintforgeError):
    pass


class CompileFailure(HintforgeError):
    def __init__(self, log: str):
        super().__init__(log.splitlines()[0] if log else "compilation failed")
        self.log = log


class CaseSetMismatch(HintforgeError):
    pass


class NonPositiveTime(HintforgeError):
    pass


# refine_loop
class BaselineFails(HintforgeError):
    def __init__(self, message: str, profile=None):
        super().__init__(message)
        self.profile = profile


# config_and_report
class ConfigError(HintforgeError):
    pass


class ConfigParse(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass
