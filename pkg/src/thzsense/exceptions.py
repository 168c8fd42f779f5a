"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/data problems exit 1, I/O
problems exit 2 (plain OSError), numerical aborts exit 3.
"""


class ConfigurationError(ValueError):
    """A config or shape constraint was violated before any computation ran."""


class DataFormatError(ValueError):
    """A stored file (dataset, checkpoint) could not be parsed."""


class TrainingDiverged(ArithmeticError):
    """Training hit a non-finite loss; carries the point of failure."""

    def __init__(self, epoch: int, batch: int, lr: float):
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch} (lr={lr:g})"
        )
