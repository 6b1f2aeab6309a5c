"""Exception types shared across the simulator."""


class RvnError(Exception):
    """Base class for all errors raised by this package."""


class MapFormatError(RvnError):
    """Malformed RVNMAP content (bad header, row, or glyph)."""


class SceneGenerationError(RvnError):
    """Procedural generation failed to produce a usable world."""


class EmptyWorldError(RvnError):
    """Requested an operation on a grid with no free cells."""


class InvalidSourceError(RvnError):
    """Distance-field source does not lie in a free cell."""


class InvalidStateError(RvnError):
    """Agent pose is inside a blocked configuration-space cell."""


class SceneUnusableError(RvnError):
    """Scene admits no valid start/goal pair under the configured ranges."""


class GoalExhaustedError(RvnError):
    """No free cell lies in the configured goal distance band."""


class EpisodeFinishedError(RvnError):
    """step() called after the episode already terminated."""


class DatasetGenerationError(RvnError):
    """Trajectory generation exhausted its retry budget."""


class RecordFormatError(RvnError):
    """Trajectory record files are malformed or inconsistent."""


class ConfigurationError(RvnError):
    """Invalid benchmark/scenario configuration."""
