"""Exception hierarchy shared across the package.

Every error raised on purpose derives from :class:`SubrankError` so callers
can catch the whole family, while the subclasses keep the failure modes of
the spec-level contracts distinguishable (configuration vs. input vs.
capability and so on).
"""


class SubrankError(Exception):
    """Base class for all errors raised by subrank."""


class ConfigurationError(SubrankError):
    """A configuration object violates one of its invariants."""


class InputError(SubrankError):
    """Caller-supplied data is outside an operation's precondition."""


class MultiwordCandidateError(InputError):
    """A substitution candidate contains internal whitespace.

    Kept distinct from plain :class:`InputError` because multiword
    candidates feed the exclusion accounting of the evaluation metric
    instead of aborting a run.
    """


class CapabilityError(SubrankError):
    """A backend does not support a required capability (e.g. gradients)."""


class DegenerateInputError(SubrankError):
    """An operation received input it is mathematically undefined on."""


class InternalConsistencyError(SubrankError):
    """Two pipeline artifacts that must agree do not (a bug, not bad input)."""


class ParseError(InputError):
    """A data file could not be parsed; message carries the line number."""


class ValidationError(InputError):
    """A parsed record violates a declared invariant."""


class ConversionError(SubrankError):
    """A dataset conversion failed (schema drift, orphan ids, ...)."""


class AggregationError(SubrankError):
    """Corpus-level aggregation has nothing to aggregate."""
