"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
NumericsError -> 3, BudgetError -> 4.
"""


class MottHopError(Exception):
    """Base class for everything raised on purpose by this package."""


class ConfigError(MottHopError):
    """Invalid input: bad law parameters, malformed specs, schema violations."""


class NumericsError(MottHopError):
    """A numerical contract could not be met (singular system, unreachable
    tolerance, overflow guard tripped)."""


class WindowExceeded(NumericsError):
    """A walk or kernel evaluation needed environment coordinates outside the
    materialized window.  Carries the range that would have been required so
    the caller can re-sample with a larger window."""

    def __init__(self, lo: int, hi: int, have_lo: int, have_hi: int):
        self.lo, self.hi = lo, hi
        self.have_lo, self.have_hi = have_lo, have_hi
        super().__init__(
            f"needed coordinates [{lo}, {hi}] but window is [{have_lo}, {have_hi}]"
        )


class BudgetError(MottHopError):
    """A step or sample budget ran out before the stopping condition."""

    def __init__(self, message: str, steps: int | None = None):
        self.steps = steps
        super().__init__(message)
