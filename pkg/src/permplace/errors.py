"""Exception hierarchy shared by all permplace modules."""


class PermplaceError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PermplaceError):
    """A file could not be parsed. Carries a locus (file/field) when known."""

    def __init__(self, message, locus=None):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


class ValidationError(PermplaceError):
    """Parsed data violates a structural invariant."""


class LinkError(PermplaceError):
    """App + overlays could not be linked into one program."""


class CycleError(PermplaceError):
    """Inheritance cycle detected while building the class hierarchy."""


class UnknownType(PermplaceError):
    """A declared receiver type is not present in the linked program."""


class ConflictError(PermplaceError):
    """Two specs map the same key to different permission sets."""

    def __init__(self, conflicts):
        self.conflicts = list(conflicts)
        super().__init__(
            "conflicting permission sets for: " + ", ".join(str(k) for k in self.conflicts)
        )


class InvalidContext(PermplaceError):
    """A 1-CFA context does not actually call the queried method."""


class InconsistentInput(PermplaceError):
    """A detected sensitive is not CHA-reachable (partition precondition)."""


class UndefinedCoverage(PermplaceError):
    """Coverage requested over a corpus with no MC/MCS instances."""
