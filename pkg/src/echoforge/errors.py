"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: sweep, filter spec, scene, or run options."""


class FilterDesignError(ConfigError):
    """A filter spec is infeasible with the requested tap count."""


class IngestError(RuntimeError):
    """A recording container or input file failed validation."""


class NumericError(RuntimeError):
    """A numeric contract was violated (non-finite data, failed assertion)."""
