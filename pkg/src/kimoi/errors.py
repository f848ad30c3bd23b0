"""Exception hierarchy with stable machine-readable error kinds.

Every error carries a ``kind`` string that the CLI emits verbatim in its
JSON error output, so the strings here are part of the public interface
and must not change between releases.
"""


class KimoiError(Exception):
    """Base class for all library errors."""

    kind = "error"


class InvalidInputError(KimoiError):
    """Input violates a documented precondition (shape, range, emptiness)."""

    kind = "invalid-input"


class SingularGeometryError(KimoiError):
    """Degenerate geometry where an invertible mapping is required."""

    kind = "singular-geometry"


class SequenceMismatchError(KimoiError):
    """Frame/landmark counts or dimensions disagree between paired inputs."""

    kind = "sequence-mismatch"


class CorpusNotFoundError(KimoiError):
    """A referenced landmark corpus path does not exist or is empty."""

    kind = "corpus-not-found"


class CorruptCheckpointError(KimoiError):
    """Checkpoint file failed magic/version/shape validation."""

    kind = "corrupt-checkpoint"


class ConfigError(KimoiError):
    """Configuration file is unreadable or fails validation."""

    kind = "config-error"


class TrainingFailureError(KimoiError):
    """Training diverged (non-finite loss). Carries the failing step."""

    kind = "training-failure"

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step
