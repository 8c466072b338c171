"""Exception hierarchy shared by all modules.

Every error carries a short machine-readable ``kind`` string (``NO_FOLD``,
``POLE_ON_PATH``...) so the command-line front end can map it to an exit code
without string matching on messages.
"""
from __future__ import annotations


class BazykinError(Exception):
    """Base class; ``kind`` identifies the failure."""

    kind = "ERROR"

    def __init__(self, message: str = "", kind: str | None = None, **info):
        if kind is not None:
            self.kind = kind
        self.info = info
        super().__init__(f"{self.kind}: {message}" if message else self.kind)


class ConfigError(BazykinError, ValueError):
    kind = "CONFIG_INVALID"

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message, path=path)


class NumericalError(BazykinError):
    """A computation could not produce a trustworthy number."""


class ModelError(NumericalError):
    """Preconditions of a model formula fail (no fold, no equilibrium...)."""


class IntegrationError(NumericalError):
    """Time stepping failed (``STEP_UNDERFLOW``, ``BOUND_VIOLATION``)."""


class UnsettledError(BazykinError):
    """The result exists but is not conclusive (``NOT_SETTLED``, ``AMBIGUOUS``).

    ``lower_bound`` is set when a partial answer is still meaningful.
    """

    def __init__(self, message: str = "", kind: str | None = None, lower_bound=None, **info):
        self.lower_bound = lower_bound
        super().__init__(message, kind=kind, lower_bound=lower_bound, **info)
