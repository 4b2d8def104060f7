"""Exception hierarchy shared by every module."""


class SocialMemError(Exception):
    """Base class for engine errors."""


class ValidationError(SocialMemError, ValueError):
    """An argument failed a precondition (empty text, wrong vote count...)."""


class DimensionError(ValidationError):
    """A vector does not match the index dimension."""


class DuplicateEntryError(SocialMemError, KeyError):
    pass


class UnknownMessageError(SocialMemError, KeyError):
    pass


class SelfEdgeError(SocialMemError):
    """A relationship would connect a person to themselves."""


class MergeError(SocialMemError):
    pass


class EmbeddingError(SocialMemError):
    pass


class RetrievalError(SocialMemError):
    pass


class ModelError(SocialMemError):
    """The language-model client failed to produce a reply."""


class SnapshotError(SocialMemError):
    """A snapshot could not be read (corrupt file or unknown schema version)."""


class BenchError(SocialMemError):
    pass
