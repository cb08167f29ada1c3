"""Exception types shared across the package."""


class CsiSuiteError(Exception):
    """Base class for all package errors."""


class FormatError(CsiSuiteError, ValueError):
    """Malformed on-disk or on-wire data (capture CSV, containers, payloads)."""


class ConfigError(CsiSuiteError, ValueError):
    """Invalid parameters, capture configs, or scenario definitions."""


class NoFramesError(CsiSuiteError, ValueError):
    """An operation that needs frames received an empty document."""


class StateError(CsiSuiteError, RuntimeError):
    """Lifecycle misuse: duplicate start, stop while idle, mutate while running."""


class TransportError(CsiSuiteError, RuntimeError):
    """Broker or socket level failure in the control plane."""
