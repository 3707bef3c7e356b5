"""Error hierarchy shared across the pipeline.

The three category bases map onto CLI exit codes: ConfigError -> 1,
DataError -> 2, ProviderError -> 3.
"""


class CotoxError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ConfigError(CotoxError):
    """Bad configuration, bad flags, or missing assets."""

    exit_code = 1


class DataError(CotoxError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class ProviderError(CotoxError):
    """An upstream service (LLM endpoint, PubChem) failed."""

    exit_code = 3
