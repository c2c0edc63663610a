"""Exception hierarchy shared across the toolkit.

DataError covers malformed or inconsistent inputs (shape mismatches,
out-of-range parameters, degenerate labels); NumericalError covers
failures of the numerics themselves (divergent cycles, singular spectra,
rank-deficient systems). The CLI maps them to distinct exit codes.
"""


class CycleUQError(Exception):
    pass


class DataError(CycleUQError, ValueError):
    pass


class NumericalError(CycleUQError, RuntimeError):
    pass
