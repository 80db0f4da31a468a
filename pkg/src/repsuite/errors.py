"""Exception hierarchy shared across the package.

Every error raised deliberately by this package derives from
:class:`RepsuiteError`, so callers (the service layer in particular) can
distinguish domain failures from genuine bugs.
"""

from __future__ import annotations


class RepsuiteError(Exception):
    """Base class for all errors raised by repsuite."""


class CatalogError(RepsuiteError):
    """A catalog file is structurally unusable (bad version, bad JSON shape)."""


class IngestError(RepsuiteError):
    """Fatal problem while reading human response data or simulation logs."""


class EmptyDistributionError(RepsuiteError):
    """No valid responses remained after filtering, so no pmf exists."""


class SupportMismatchError(RepsuiteError):
    """Two distributions (or a distribution and its question) disagree on support."""


class WrongScaleKindError(RepsuiteError):
    """An ordinal-only operation was applied to a nominal scale, or vice versa."""


class DegenerateScaleError(RepsuiteError):
    """The response scale has zero diameter, so normalization is undefined."""


class NoComparableQuestionsError(RepsuiteError):
    """The sets of questions with data on both sides do not overlap."""


class InsufficientRowsError(RepsuiteError):
    """Fewer subgroup rows than the operation needs (means, correlations, splits)."""


class DegenerateStructureError(RepsuiteError):
    """Too few usable correlation columns remain to compare structure."""


class OracleScaleExceededError(RepsuiteError):
    """The brute-force transport oracle only handles small supports by design."""


class SimulationError(RepsuiteError):
    """Fatal sampler problem (bad configuration, missing credentials)."""
