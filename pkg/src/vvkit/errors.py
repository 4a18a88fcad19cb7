"""Shared base class for the toolkit's typed domain errors."""

from __future__ import annotations


class ToolkitError(Exception):
    """Base for all typed domain errors raised by this package.

    The CLI reports ``code`` (the concrete class name) on the diagnostic
    stream and exits 1, so every failure mode stays machine-identifiable.
    """

    @property
    def code(self) -> str:
        return type(self).__name__
