"""Neuro core errors"""


class NeuroError(ValueError):
    """Base class for numerical core errors"""


class ShapeMismatchError(NeuroError):
    """Operand shapes do not fit together"""


class TapeError(NeuroError):
    """Misuse of the autodiff tape"""


class NonFiniteGradientError(NeuroError):
    """A gradient holds NaN or infinity"""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"non-finite gradient for parameter {name!r}")


class CheckpointError(NeuroError):
    """Unreadable or inconsistent checkpoint file"""
