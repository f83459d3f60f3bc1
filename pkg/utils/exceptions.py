"""
Exception hierarchy for the FairRec marketing-bias lab
Every error carries the process exit code the command layer reports
"""


class FairRecError(Exception):
    """Base class for all lab errors"""
    exit_code = 1

    def __init__(self, message=None):
        super().__init__(message or self.__class__.__name__)


# --- input errors (exit 2) ---------------------------------------------------

class InputError(FairRecError):
    exit_code = 2


class MissingColumn(InputError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"Missing required column: {name}")


class MalformedRows(InputError):
    """Raised when too many rows fail validation; carries (line_no, reason) pairs"""

    def __init__(self, errors, total_rows):
        self.errors = list(errors)
        self.total_rows = total_rows
        preview = '; '.join(f"line {line}: {reason}" for line, reason in self.errors[:5])
        super().__init__(
            f"{len(self.errors)} of {total_rows} rows malformed ({preview})"
        )


class InvalidConfig(InputError):
    pass


class DatasetFormatError(InputError):
    pass


# --- training failures (exit 3) ----------------------------------------------

class TrainingError(FairRecError):
    exit_code = 3


class NonFiniteLoss(TrainingError):
    def __init__(self, epoch, batch, detail=''):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"Non-finite loss at epoch {epoch}, batch {batch}{': ' + detail if detail else ''}")


# --- artifacts ------------------------------------------------------------------

class MissingArtifact(FairRecError):
    exit_code = 4


class EmptyReportSet(FairRecError):
    exit_code = 5


# --- computational contract violations ---------------------------------------

class IndexOutOfRange(FairRecError):
    pass


class EmptyAfterFiltering(FairRecError):
    pass


class EmptyTable(FairRecError):
    pass


class ZeroExpectedCell(FairRecError):
    def __init__(self, m, n):
        self.m = m
        self.n = n
        super().__init__(f"Expected count is zero in cell ({m}, {n})")


class DegenerateDesign(FairRecError):
    pass


class DomainError(FairRecError):
    pass


class EmptyBatch(FairRecError):
    pass


class DegenerateBatch(FairRecError):
    pass


class EmptyInput(FairRecError):
    pass


class LengthMismatch(FairRecError):
    pass


class DegenerateSegments(FairRecError):
    pass


class NoPositives(FairRecError):
    pass


class DimensionMismatch(FairRecError):
    pass
