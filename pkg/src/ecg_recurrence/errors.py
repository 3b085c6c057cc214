"""Exception hierarchy shared by every stage of the pipeline.

Each family maps onto one CLI exit code: configuration problems exit with 2,
bad input data with 3 and numerical divergence with 4.
"""


class PipelineError(Exception):
    exit_code = 1


class ConfigError(PipelineError):
    exit_code = 2


class DataError(PipelineError):
    exit_code = 3


class HeaderParseError(DataError):
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class UnsupportedFormatError(DataError):
    pass


class TruncationError(DataError):
    pass


class MissingSampleError(DataError):
    pass


class UnsupportedRateError(DataError):
    pass


class DegenerateSignalError(DataError):
    pass


class SeriesTooShortError(DataError):
    pass


class InvalidThresholdError(DataError):
    pass


class ChannelOrderError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class DegenerateLabelsError(DataError):
    pass


class StratificationError(DataError):
    pass


class MissingArtifactError(DataError):
    def __init__(self, path, producer):
        self.path = path
        self.producer = producer
        super().__init__(f"missing {path}; run the `{producer}` subcommand first")


class ShapeError(ValueError):
    def __init__(self, op, *shapes):
        self.shapes = shapes
        desc = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {desc}")


class ModelNotReadyError(PipelineError):
    pass


class DivergenceError(PipelineError):
    exit_code = 4

    def __init__(self, epoch, learning_rate):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(f"loss became non-finite at epoch {epoch} (lr={learning_rate:g})")
