"""Exception types shared across the package."""


class CalibrationMismatchError(Exception):
    """Calibration does not cover the requested layout or alignment method."""


class CorruptCalibrationError(Exception):
    """Calibration data violates its invariants or failed integrity checks."""


class CalibrationMissingError(Exception):
    """A test requiring a null calibration was run without one."""


class UnsupportedDesignError(Exception):
    """The layout cannot support the requested test (e.g. no error df)."""
