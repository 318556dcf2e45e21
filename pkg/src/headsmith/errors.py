"""Exception hierarchy shared by every headsmith module."""


class HeadsmithError(Exception):
    """Base class for all errors raised by headsmith."""


class ShapeError(HeadsmithError, ValueError):
    """Array widths or dimensions do not line up."""


class ConfigError(HeadsmithError, ValueError):
    """Invalid configuration or argument value."""


class DataError(HeadsmithError, ValueError):
    """Input data is malformed, non-finite, or inconsistent."""
