"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes; library code raises plain
``ValueError`` for local contract violations (bad shapes, bad arguments).
"""


class GazePrivacyError(Exception):
    """Base class for pipeline-level failures."""


class ConfigError(GazePrivacyError):
    """Invalid or inconsistent configuration (exit code 2)."""


class DataError(GazePrivacyError):
    """Malformed or missing input data (exit code 3)."""


class CheckpointError(DataError):
    """Checkpoint file is corrupt, wrong version, or wrong architecture."""


class NumericalError(GazePrivacyError):
    """Non-finite values encountered during optimization (exit code 4)."""
