"""Exception hierarchy shared across the package.

Anything raised while ingesting user-supplied files or configuration
derives from InputError, so the command line layer can map bad input
to a distinct exit code without inspecting messages.
"""


class InputError(Exception):
    """Malformed or inconsistent user-supplied input."""


class TaxonomyError(InputError):
    """Edge list does not describe a single rooted tree."""


class EmbeddingError(InputError):
    """Embedding file is malformed or dimensionally inconsistent."""


class DepPathError(InputError):
    """Dependency path file is malformed."""


class FrequencyError(InputError):
    """Pair frequency file is malformed."""


class SamplingError(InputError):
    """Training instances cannot be generated from this taxonomy."""


class ConfigError(InputError):
    """Run configuration is missing or contradictory."""


class CheckpointError(InputError):
    """Checkpoint file is corrupt or incompatible."""


class TrainingError(Exception):
    """Optimization failed, for example a non-finite loss."""
