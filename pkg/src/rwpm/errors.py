"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class RWPMError(Exception):
    exit_code = 1


class InputFormatError(RWPMError):
    """Malformed input file or unreadable tensor."""

    exit_code = 2


class ParameterError(RWPMError):
    """A hyper-parameter or config value outside its valid range."""

    exit_code = 2


class TensorFormatError(InputFormatError):
    pass


class TensorLengthError(InputFormatError):
    pass


class TensorDataError(InputFormatError):
    pass


class SizeError(RWPMError):
    """Dimension mismatch between arrays."""

    exit_code = 3


class PartitionError(SizeError):
    pass


class EvaluationError(SizeError):
    pass


class NumericalError(RWPMError):
    exit_code = 4


class DegenerateRowError(NumericalError):
    def __init__(self, index, norm):
        super().__init__(f"pixel {index} has degenerate embedding (norm {norm:.3g})")
        self.index = index


class CalibrationError(NumericalError):
    pass
