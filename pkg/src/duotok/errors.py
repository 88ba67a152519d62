"""Exception hierarchy shared by all modules."""


class DuoTokError(Exception):
    """Base class for package errors."""


class ConfigError(DuoTokError, ValueError):
    """Invalid or incomplete run configuration."""


class DataError(DuoTokError, ValueError):
    """Input data is malformed or inconsistent."""


class FormatError(DataError):
    """A binary file does not follow its declared layout."""


class BadMagicError(FormatError):
    pass


class TruncatedError(FormatError):
    pass
