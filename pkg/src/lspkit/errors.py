"""Exception and warning types shared by all lspkit modules.

Every error carries a short machine-readable ``code`` (``UNKNOWN_NODE``,
``NO_CONVERGENCE``, ...) so callers and the command line can report it verbatim.
"""

from __future__ import annotations


class LspkitError(Exception):
    def __init__(self, code: str, message: str = ""):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}" if message else code)


class InpError(LspkitError):
    """Raised by :func:`lspkit.inp.parse_inp` when the report holds errors."""

    def __init__(self, report):
        self.report = report
        first = report.errors[0]
        extra = f" (+{len(report.errors) - 1} more)" if len(report.errors) > 1 else ""
        super().__init__(first.code, f"{first.message} [{first.location}]{extra}")


class SimulationError(LspkitError):
    def __init__(self, code: str, message: str = "", step: int | None = None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(code, message)


class DetectorError(LspkitError):
    pass


class SearchError(LspkitError):
    pass


class LspkitWarning(UserWarning):
    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)
