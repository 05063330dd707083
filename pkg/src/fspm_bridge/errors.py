"""Exception hierarchy for the bridge.

Every failure mode named by an operation contract gets its own class so
callers (and the CLI exit-code mapping) can branch on type rather than on
message text.
"""

from __future__ import annotations


class BridgeError(Exception):
    """Base class for all errors raised by this package."""


# -- graph model ------------------------------------------------------------


class GraphError(BridgeError):
    pass


class DuplicateId(GraphError):
    pass


class UnknownEndpoint(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class ScaleViolation(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class InvalidGraph(GraphError):
    """Operation requires a graph that passes validate()."""


# -- XEG file format --------------------------------------------------------


class FormatError(BridgeError):
    pass


class XegSyntaxError(FormatError):
    """Malformed XML; carries a (line, column) position when known."""

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        super().__init__(message)
        self.position = position


class SchemaError(FormatError):
    """Well-formed XML that does not match the XEG schema."""


class SemanticError(FormatError):
    """Schema-valid document whose graph fails validation."""


# -- geometry ---------------------------------------------------------------


class GeometryError(BridgeError):
    pass


class ZeroAxis(GeometryError):
    pass


class NonAffine(GeometryError):
    pass


class WrongMode(GeometryError):
    """Graph transform mode does not match the requested direction."""


class SingularParentTransform(GeometryError):
    pass


class NoEntry(GeometryError):
    """Graphic type has no dictionary entry for the requested form."""


class BadArgs(GeometryError):
    """Signature arguments do not match the translation rule."""


class UnsupportedType(GeometryError):
    pass


# -- pipeline ---------------------------------------------------------------


class PipelineError(BridgeError):
    pass


class NoAdapter(PipelineError):
    pass


class AdapterFailure(PipelineError):
    pass


class UnmappedEdgeType(PipelineError):
    def __init__(self, tag: str):
        super().__init__(f"no mapping for edge type {tag!r}")
        self.tag = tag


class TypeMismatch(PipelineError):
    pass


class UnknownCompositeType(PipelineError):
    pass


class TemplateArity(PipelineError):
    pass


class MissingFineScale(PipelineError):
    pass


class OperatorTypeMismatch(PipelineError):
    pass


class StageError(PipelineError):
    """First failing pipeline stage; wraps the underlying error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class ConfigError(PipelineError):
    """Malformed dictionary/scheme/pipeline/roster configuration file."""


# -- protocol ---------------------------------------------------------------


class ProtocolError(BridgeError):
    pass


class Oversize(ProtocolError):
    pass


class Truncated(ProtocolError):
    pass


class MalformedMessage(ProtocolError):
    pass


class ConnectRefused(ProtocolError):
    pass


class ModeRejected(ProtocolError):
    pass


class StepIndexMismatch(ProtocolError):
    pass


class ServerError(ProtocolError):
    """Error message received from the peer; carries the peer's code."""

    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


class ProtocolTimeout(ProtocolError):
    pass
