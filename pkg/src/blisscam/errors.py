"""Exception types shared across the simulator."""


class BlissError(Exception):
    """Base class for all simulator errors."""


class ConfigError(BlissError):
    """Invalid or inconsistent configuration value."""


class FormatError(BlissError):
    """Malformed file or byte stream (magic, layout, dimensions)."""


class SequenceGapError(FormatError):
    """A numbered frame file is missing from an input directory."""


class ContractError(BlissError):
    """Caller violated an operation precondition (shape/ROI mismatch etc.)."""


class CorruptStreamError(FormatError):
    """Run-length stream is truncated or inconsistent with its header."""


class WeightFormatError(FormatError):
    """Weight bundle file fails validation."""


class NoPupilError(BlissError):
    """Segmentation map contains too few pupil pixels for gaze regression."""


class SchedulingError(BlissError):
    """Pipeline stage graph cannot be scheduled with the given timings."""
