"""Exception types shared across the toolkit."""


class SpecJointError(Exception):
    """Base class for all toolkit errors."""


class AudioFormatError(SpecJointError, ValueError):
    """WAV file is not PCM-16 mono at the expected sample rate."""


class ConfigError(SpecJointError, ValueError):
    """Invalid configuration: bad key, bad value, or incompatible combination."""


class FeatureKindError(SpecJointError, ValueError):
    """A feature matrix of the wrong kind was passed to an operation."""


class ScalingError(SpecJointError, ValueError):
    """Mixing cannot scale a silent clean or noise signal."""


class MetricError(SpecJointError, ValueError):
    """Metric is undefined for the given inputs (e.g. all-silent reference)."""


class TrainingDivergedError(SpecJointError, RuntimeError):
    """Training produced a non-finite loss or gradient and was aborted."""
