"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: missing inputs exit 2, validation
failures exit 3, training divergence exit 4.
"""


class TripTimeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TripTimeError, ValueError):
    """Input violates a documented precondition or invariant."""


class SchemaError(ValidationError):
    """A required column is missing from an input file header."""


class UndefinedBearingError(ValidationError):
    """Bearing requested between two identical points."""


class DegenerateTripError(ValidationError):
    """Trip has zero duration and cannot carry an average speed."""


class UnmatchableTripError(ValidationError):
    """Every point of a trip failed to match the road network."""


class TrainingDiverged(TripTimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")


class TransportError(TripTimeError):
    """Remote matching request failed at the network level."""

    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempts)")


class RemoteRejectionError(TripTimeError):
    """Remote matching service answered with a non-success response."""

    def __init__(self, message: str, url: str, status: int | None = None):
        self.url = url
        self.status = status
        super().__init__(f"{message} [status={status}] for {url}")
