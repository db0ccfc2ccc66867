"""Exception hierarchy. Exit codes: validation-style errors map to 1, numeric errors to 2."""


class TmdError(Exception):
    exit_code = 1


class ValidationError(TmdError):
    """Input data or arguments violate a documented precondition."""


class FormatError(ValidationError):
    """File does not start with the expected magic/header layout."""


class VersionError(ValidationError):
    """File carries an unsupported format version."""


class CorruptionError(ValidationError):
    """File is structurally valid but truncated or fails its checksum."""


class DimensionError(ValidationError):
    """Shape or dimensionality mismatch."""


class ConfigError(ValidationError):
    """Inconsistent or out-of-range configuration."""


class SpaceError(ValidationError):
    """Scaled/raw space mismatch between components."""


class UnsupportedOperationError(ValidationError):
    """Operation not available for this model variant."""


class NumericError(TmdError):
    """Non-finite values encountered during computation."""

    exit_code = 2
