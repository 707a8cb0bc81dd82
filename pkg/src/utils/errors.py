# src/utils/errors.py
from typing import Optional


class TargetedVAEError(Exception):
    """Base class for every error raised by this package"""


class ShapeError(TargetedVAEError):
    """Operand shapes disagree along a named axis"""

    def __init__(self, op: str, axis: str, expected, found):
        self.op = op
        self.axis = axis
        self.expected = expected
        self.found = found
        super().__init__(
            f"{op}: shape mismatch on axis '{axis}' (expected {expected}, found {found})")


class NonFiniteError(TargetedVAEError):
    """An operation produced NaN or Inf"""

    def __init__(self, op: str, detail: str = ""):
        self.op = op
        message = f"{op}: non-finite values produced"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class GraphError(TargetedVAEError):
    """Misuse of the recorded computation graph"""


class DataError(TargetedVAEError):
    """Dataset files missing or inconsistent"""


class IdxFormatError(DataError):
    """Malformed IDX container; `offset` is the byte where parsing failed"""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset}")


class BadMagic(IdxFormatError):
    pass


class TruncatedFile(IdxFormatError):
    pass


class DimensionMismatch(IdxFormatError):
    pass


class LabelMismatch(DataError):
    """A reference index does not hold the digit it is supposed to represent"""

    def __init__(self, idx: int, expected: int, found: int):
        self.idx = idx
        self.expected = expected
        self.found = found
        super().__init__(
            f"reference image {idx} should be digit {expected} but is labelled {found}")


class CheckpointError(TargetedVAEError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class ConfigError(TargetedVAEError):
    pass


class UnsupportedLatentDim(TargetedVAEError):
    pass


class NumericalAbort(TargetedVAEError):
    """A training step hit non-finite values and was abandoned"""

    def __init__(self, epoch: int, batch: int, cause: Optional[Exception] = None):
        self.epoch = epoch
        self.batch = batch
        message = f"numerical abort at epoch {epoch}, batch {batch}"
        if cause is not None:
            message += f": {cause}"
        super().__init__(message)
