"""Configuration management via environment variables."""

import os


def get_threads() -> int:
    """Get the Monte Carlo worker cap from environment (0 = auto)."""
    return int(os.getenv("TKO_THREADS", "0"))


def resolve_workers() -> int:
    """Number of worker threads to use, honoring TKO_THREADS."""
    requested = get_threads()
    if requested > 0:
        return requested
    return os.cpu_count() or 1


def get_default_seed() -> int:
    """Get the default random seed from environment or use default."""
    return int(os.getenv("TKO_SEED", "20240101"))


def get_log_level() -> str:
    """Get the log level name from environment or use default."""
    return os.getenv("TKO_LOG_LEVEL", "WARNING").upper()


def get_output_format() -> str:
    """Get the default output format (csv or json)."""
    return os.getenv("TKO_OUTPUT_FORMAT", "csv").lower()
