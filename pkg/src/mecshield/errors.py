class ConfigError(Exception):
    """Bad run configuration (unknown scheme, missing field, bad value)."""


class DataError(Exception):
    """Malformed external data (flow CSV schema or row problems)."""
