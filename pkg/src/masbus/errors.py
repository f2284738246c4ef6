"""Exception hierarchy shared across the bus, agents, environment and config."""

from __future__ import annotations


class BusError(Exception):
    """Base class for every error raised by this package."""


# --- term grammar ---------------------------------------------------------


class TermSyntaxError(BusError):
    """Malformed term text; ``position`` is a 0-based index into the input."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# --- endpoint URIs --------------------------------------------------------


class UriError(BusError):
    pass


class EmptyUriError(UriError):
    pass


class MissingSchemeError(UriError):
    pass


class BadParamError(UriError):
    pass


class DuplicateParamKeyError(UriError):
    pass


# --- routing engine -------------------------------------------------------


class DuplicateSchemeError(BusError):
    pass


class BusRunningError(BusError):
    pass


class AlreadyRunningError(BusError):
    pass


class AlreadyStoppedError(BusError):
    pass


class DuplicateRouteIdError(BusError):
    pass


class UnknownSchemeError(BusError):
    pass


class UnknownTransformError(BusError):
    pass


class UnknownRouteError(BusError):
    pass


class RouteNotRunningError(BusError):
    pass


class ConsumerUnsupportedError(BusError):
    """The component cannot act as a route source for this URI."""


class ProducerUnsupportedError(BusError):
    """The component cannot act as a route target for this URI."""


class MissingParamError(BusError):
    def __init__(self, param: str, uri: str = ""):
        detail = f" in {uri}" if uri else ""
        super().__init__(f"missing required parameter '{param}'{detail}")
        self.param = param


# --- agents ---------------------------------------------------------------


class DuplicateNameError(BusError):
    pass


class UnknownReceiverError(BusError):
    pass


class UnknownAgentError(BusError):
    pass


class NotLocalAgentError(BusError):
    pass


# --- environment ----------------------------------------------------------


class UnknownWorkspaceError(BusError):
    pass


class UnknownArtifactError(BusError):
    pass


class UnknownOperationError(BusError):
    pass


class OperationFailedError(BusError):
    """An artifact operation ran and reported failure; ``reason`` is a Term."""

    def __init__(self, reason):
        super().__init__(f"operation failed: {reason}")
        self.reason = reason


class OutboxBusyError(BusError):
    """An artifact outbox already has an attached consumer."""


# --- endpoint component specifics ----------------------------------------


class MissingArtifactNameError(BusError):
    pass


class MissingOperationNameError(BusError):
    pass


# --- route configuration ---------------------------------------------------


class RouteConfigError(BusError):
    """Route file problem, located at (line, col) when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        location = f"{line}:{col}: " if line is not None else ""
        super().__init__(f"{location}{message}")
        self.line = line
        self.col = col


class XmlSyntaxError(RouteConfigError):
    pass


class MissingFromError(RouteConfigError):
    pass


class MissingToError(RouteConfigError):
    pass


class UnknownElementError(RouteConfigError):
    pass


class BadUriError(RouteConfigError):
    pass


class OrderViolationError(BusError):
    """Builder calls arrived out of the from -> processors -> to order."""


class IncompleteRouteError(BusError):
    """Builder finalized without a source or without any target."""


# --- scenario ---------------------------------------------------------------


class ScenarioConfigError(BusError):
    pass


class StageTimeoutError(BusError):
    """A scenario stage did not complete in time; carries the partial report."""

    def __init__(self, stage: str, elapsed: float, report=None):
        super().__init__(f"stage {stage} timed out after {elapsed:.2f}s")
        self.stage = stage
        self.elapsed = elapsed
        self.report = report
