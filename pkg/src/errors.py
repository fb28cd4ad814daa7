"""
Error Types for the Recurrent Priming Codec

One hierarchy for every failure the library raises. Each class carries the
process exit code the command-line layer maps it to.
"""

from typing import Optional


class RpcError(Exception):
    """Base class for codec errors."""
    exit_code = 1


class ShapeError(RpcError, ValueError):
    """Tensor or image shapes do not fit the operation."""


class ConfigError(RpcError, ValueError):
    """Invalid or unknown configuration value."""
    exit_code = 2


# =============================================================================
# Checkpoints
# =============================================================================

class CheckpointError(RpcError):
    """Checkpoint could not be read or does not fit the model."""
    exit_code = 3


class CheckpointFormatError(CheckpointError):
    """Bad magic, unsupported version, or truncated checkpoint file."""


class MissingEntryError(CheckpointError):
    """A parameter the model needs is absent from the checkpoint."""

    def __init__(self, name: str):
        super().__init__(f"checkpoint is missing entry '{name}'")
        self.name = name


class UnknownEntryError(CheckpointError):
    """The checkpoint holds an entry the model does not know."""

    def __init__(self, name: str):
        super().__init__(f"checkpoint holds unknown entry '{name}'")
        self.name = name


class EntryShapeError(CheckpointError):
    """A checkpoint entry has a different shape than the model parameter."""

    def __init__(self, name: str, expected: tuple, found: tuple):
        super().__init__(
            f"checkpoint entry '{name}' has shape {found}, model expects {expected}"
        )
        self.name = name
        self.expected = expected
        self.found = found


class ArchitectureMismatchError(CheckpointError):
    """Stream and checkpoint were produced by different architectures."""

    def __init__(self, stream_digest: str, checkpoint_digest: str):
        super().__init__(
            f"architecture mismatch: stream digest {stream_digest}, "
            f"checkpoint digest {checkpoint_digest}"
        )
        self.stream_digest = stream_digest
        self.checkpoint_digest = checkpoint_digest


class UntrainedCheckpointError(CheckpointError):
    """Evaluation was asked to run on a checkpoint with no training steps."""


# =============================================================================
# Streams
# =============================================================================

class CorruptStreamError(RpcError, ValueError):
    """Container bytes cannot be decoded."""
    exit_code = 4


class BadMagicError(CorruptStreamError):
    """Container does not start with the expected magic bytes."""


class TruncatedStreamError(CorruptStreamError):
    """A declared length runs past the end of the data."""


class VersionMismatchError(CorruptStreamError):
    """Container version is not supported by this build."""


# =============================================================================
# Evaluation / training
# =============================================================================

class EvaluationDomainError(RpcError, ValueError):
    """RD curves or metrics cannot be evaluated on the given inputs."""
    exit_code = 5


class TrainingDivergedError(RpcError, ArithmeticError):
    """A non-finite loss or gradient appeared during training."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step
