"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file or byte stream does not match its declared on-disk format."""


class ConfigError(RuntimeError):
    """Inconsistent run configuration, e.g. artifact fingerprint mismatch."""
