"""Exception hierarchy shared by every provforge module."""

from __future__ import annotations


class ProvForgeError(Exception):
    """Base class for all provforge errors."""


class ParseError(ProvForgeError):
    """Malformed input text. Carries 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line else ""
        super().__init__(f"{where}{message}")


class UnknownRelation(ParseError):
    pass


class UnknownNodeKind(ParseError):
    pass


class UnboundVariable(ParseError):
    pass


class InvalidRange(ParseError):
    pass


class UndeclaredIdentifier(ParseError):
    pass


class DuplicateIdentifier(ParseError):
    pass


class GraphError(ProvForgeError):
    pass


class SignatureMismatch(GraphError):
    pass


class UniqueGenerationViolation(GraphError):
    pass


class DanglingEndpoint(GraphError):
    pass


class UnknownNode(GraphError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class CyclicGraph(GraphError):
    pass


class InvalidGraph(GraphError):
    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class UnknownKey(ProvForgeError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class StaleBinding(ProvForgeError):
    pass


class UnsupportedConstruct(ProvForgeError):
    def __init__(self, constructs):
        self.constructs = list(constructs)
        super().__init__("no query rendering for: " + ", ".join(self.constructs))


class MetricMismatch(ProvForgeError):
    pass


class EmptyActiveSet(UserWarning):
    """The seed declares no relations, so generation can only add nothing."""


class SeedPropertyConflict(UserWarning):
    """Two seed elements of the same kind disagree on a property value."""


class MissingTitleProperty(ProvForgeError):
    """No entity carries the title property the contributions metric needs."""
