"""Exception hierarchy.

``ValidationError`` subclasses map to CLI exit code 1, ``ProviderError``
subclasses to exit code 2.
"""


class CotforgeError(Exception):
    pass


class ValidationError(CotforgeError, ValueError):
    pass


class ProviderError(CotforgeError):
    pass


# synthesis
class RemoteUnavailable(ProviderError):
    pass


class CaptionTooLong(ProviderError):
    pass


class NoTriplesFound(ValidationError):
    pass


class NoSubstitution(ValidationError):
    pass


class FlipNotGuaranteed(ValidationError):
    pass


class TooFewQuestions(ValidationError):
    pass


# embedding / tree
class EmptyText(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EmptyLeafSet(ValidationError):
    pass


class InvalidRange(ValidationError):
    pass


# reward
class EmptyReference(ValidationError):
    pass


# grpo
class UnknownPrompt(ValidationError):
    pass


class EmptyGroup(ValidationError):
    pass


class NonpositiveProbability(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


# bench
class MissingPrediction(ValidationError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"missing predictions for ids: {', '.join(self.missing)}")


class EmptySet(ValidationError):
    pass


# config
class ParseError(ValidationError):
    pass


class InvariantViolation(ValidationError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
