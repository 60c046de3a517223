"""Exception hierarchy shared across the library.

Data errors (bad input panels) and numerical errors (singular designs,
degenerate regressions) are kept on separate branches so that callers --
in particular the CLI -- can map them to distinct exit codes.
"""


class ScceError(Exception):
    """Base class for all library errors."""


class PanelDataError(ScceError):
    """Invalid or malformed panel input."""


class UnbalancedPanel(PanelDataError):
    """A (unit, time) cell is missing from the panel grid."""

    def __init__(self, unit, time):
        self.unit = unit
        self.time = time
        super().__init__(f"panel is unbalanced: missing cell (unit={unit!r}, time={time!r})")


class DuplicateCell(PanelDataError):
    """A (unit, time) cell appears more than once."""

    def __init__(self, unit, time):
        self.unit = unit
        self.time = time
        super().__init__(f"duplicate cell (unit={unit!r}, time={time!r})")


class NonFiniteValue(PanelDataError):
    """A panel entry is NaN or infinite."""


class TooSmall(PanelDataError):
    """Panel dimensions below the minimum the method supports."""


class NumericalError(ScceError):
    """Numerical failure during estimation or inference."""


class SingularDesign(NumericalError):
    """Pooled Gram matrix fails the relative-eigenvalue gate."""


class SingularUnit(NumericalError):
    """A unit-level regression in the mean-group estimator is singular."""

    def __init__(self, unit):
        self.unit = unit
        super().__init__(f"unit-level regression singular for unit {unit!r}")


class SingularSigmaV(NumericalError):
    """Residual second-moment matrix is not invertible."""


class WindowTooLarge(NumericalError):
    """HAC window exceeds the available sample length."""


class SeriesTooShort(NumericalError):
    """Series too short for the requested time-series regression."""


class DegenerateSeries(NumericalError):
    """Series has no variation after differencing; regression undefined."""


class NoNonlinearColumns(NumericalError):
    """The sieve basis contains no nonlinear columns to test."""


class TooManySkipped(NumericalError):
    """More than the tolerated share of replications failed."""

    def __init__(self, skipped, total):
        self.skipped = skipped
        self.total = total
        super().__init__(f"{skipped} of {total} replications failed (> 1% tolerated)")
