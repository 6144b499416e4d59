"""Exception hierarchy shared by all neurocodec modules.

Each class maps to one CLI exit code (see ``neurocodec.cli``): format and
structure problems exit 2, codec-level failures exit 3, undefined metrics
exit 4.
"""


class NeurocodecError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(NeurocodecError):
    """Malformed bytes or text: bad magic, bad header, unparseable fields."""


class StructureError(NeurocodecError):
    """Structurally inconsistent data: mismatched dims, truncated records."""


class SizeError(NeurocodecError):
    """Input too small for the requested operation (e.g. transform depth)."""


class RangeError(NeurocodecError):
    """Requested window or index lies outside the recording."""


class BudgetError(NeurocodecError):
    """Bit budget too small to emit even the stream header."""


class FitError(NeurocodecError):
    """Source fitting failed on every candidate start point."""


class MetricError(NeurocodecError):
    """Metric undefined for the given inputs (e.g. zero-energy reference)."""
