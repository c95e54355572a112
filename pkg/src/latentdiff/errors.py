"""Exception taxonomy shared across the package.

Every error carries an optional ``field`` naming the offending input
(dotted path, e.g. ``concept_op.weights``) so callers such as the HTTP
service can report structured validation failures.
"""


class LatentDiffError(Exception):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


# -- tensor algebra -----------------------------------------------------------

class ShapeMismatch(LatentDiffError):
    pass


class NonFiniteInput(LatentDiffError):
    pass


class ZeroNorm(LatentDiffError):
    pass


class ArityMismatch(LatentDiffError):
    pass


class AffineViolation(LatentDiffError):
    pass


# -- pipeline / jobs ----------------------------------------------------------

class UnknownSite(LatentDiffError):
    pass


class LayerCountMismatch(LatentDiffError):
    pass


class ValidationError(LatentDiffError):
    pass


class WeightCapExceeded(ValidationError):
    pass


class BackendUnavailable(LatentDiffError):
    pass


class EmptyPrompt(LatentDiffError):
    pass


class EmptyControlRef(LatentDiffError):
    pass


# -- field mapper -------------------------------------------------------------

class BadResolution(LatentDiffError):
    pass


class BadThresholds(LatentDiffError):
    pass


# -- files / config -----------------------------------------------------------

class ParseError(LatentDiffError):
    pass


class SchemaError(LatentDiffError):
    pass


class IoError(LatentDiffError):
    pass


# -- harness ------------------------------------------------------------------

class EmptySchedule(LatentDiffError):
    pass


class CaptionClientUnavailable(LatentDiffError):
    pass
