"""Exception hierarchy; the CLI maps every ExportError to exit code 1."""


class ExportError(Exception):
    exit_code = 1


class ConfigError(ExportError):
    """Inconsistent or out-of-range export settings."""


class ResolutionError(ExportError):
    """Model or text source could not be resolved."""


class PairingError(ExportError):
    """Rows do not pair one-to-one with the clean export."""
