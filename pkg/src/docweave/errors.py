"""Exception types shared across the package.

Grouped by how the command line maps them to exit codes: input problems
(bad repository path, malformed fixtures), configuration problems, and
backend problems (unreachable or misbehaving model endpoints).
"""

from __future__ import annotations


class DocweaveError(Exception):
    """Base class for every error this package raises on purpose."""


class InputError(DocweaveError):
    """The repository or another user-supplied input cannot be used."""


class ConfigError(DocweaveError):
    """The merged run configuration is invalid or incomplete."""


class BackendError(DocweaveError):
    """A model endpoint failed after the configured retries."""


class SearchUnavailableError(BackendError):
    """External search cannot be served (offline without a cached result).

    The agent loop turns this into an observation instead of crashing.
    """


class GraphConstructionError(InputError):
    """A dependency edge references a unit that does not exist."""


class MemoryConflictError(DocweaveError):
    """A commit would overwrite an existing record without the revision flag."""


class OrderingViolationError(DocweaveError):
    """A unit was processed before one of its traversal-order predecessors."""


class VerifierError(DocweaveError):
    """The verification pipeline could not produce a usable judgment."""
