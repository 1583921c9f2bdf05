"""Exception types mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid configuration or incompatible option combination. Exit code 2."""


class RasterFormatError(ValueError):
    """Malformed raster file (bad magic, version, or truncation). Exit code 3."""


class ResourceCapError(RuntimeError):
    """Refused because a configured memory cap would be exceeded. Exit code 4."""
