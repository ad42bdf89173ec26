"""Exception types shared across the package.

Argument validation raises plain ValueError; the classes here mark
failure modes callers may want to catch and handle individually.
"""


class QuantemuError(Exception):
    """Base class for package-specific failures."""


class TrainingDivergedError(QuantemuError):
    """Loss became non-finite during training; message carries the epoch."""


class OptimizerError(QuantemuError):
    """Optimizer received a non-finite gradient; message names the block."""


class DegenerateComponentError(QuantemuError):
    """Mixture fitting collapsed a component and ran out of restarts."""


class ConditioningError(QuantemuError):
    """A kernel matrix stayed non-positive-definite after jitter escalation."""


class CapacityError(QuantemuError):
    """Input size exceeds a documented hard cap (dense GP scaling)."""


class AcquisitionError(QuantemuError):
    """Active-learning scoring produced no usable candidate."""


class OracleError(QuantemuError):
    """An active-learning oracle query failed; loop returns a partial curve."""


class ContainerFormatError(QuantemuError):
    """Model file is not a recognizable container."""


class ContainerVersionError(ContainerFormatError):
    """Model container was written by an incompatible format version."""
