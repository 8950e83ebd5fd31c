"""Shared error type carrying a short stable code.

The harness records failed grid cells by code instead of aborting, so every
recoverable failure raised by library code uses :class:`LabError` with a
kebab-case code string.
"""


class LabError(ValueError):
    """ValueError with a machine-readable ``code`` attribute."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        super().__init__(f"{code}: {detail}" if detail else code)
