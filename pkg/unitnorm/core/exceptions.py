"""
Unitnorm's exceptions.
"""


class UnitNormError(Exception):
    """
    Base error, ancestor for all other Unitnorm's errors.
    """

    pass


class ImproperlyConfiguredError(UnitNormError):
    """
    Configuration error.
    """

    pass


class ProcessError(UnitNormError):
    """
    Worker process error.
    """

    pass


class CommandError(UnitNormError):
    """
    Management command error.
    """

    pass


class StageError(UnitNormError):
    """
    Failure of one stage of the experiment recipe. *stage* is the name
    of the failed stage.
    """

    def __init__(self, stage, message):
        super(StageError, self).__init__(
            "Stage '{}' failed: {}".format(stage, message))
        self.stage = stage


class TensorError(UnitNormError):
    """
    Misuse of the tensor library, e.g. backward through released graph.
    """

    pass


class ShapeError(TensorError, ValueError):
    """
    Operands of a tensor operation have incompatible shapes.
    """

    pass


class NonFiniteError(TensorError, FloatingPointError):
    """
    Forward pass produced NaN or infinite values.
    """

    pass


class CheckpointError(UnitNormError):
    """
    Checkpoint file is malformed or does not fit the model.
    """

    pass


class CorpusError(UnitNormError):
    """
    Corpus directory is malformed or its processing failed.
    """

    pass
