"""Exception hierarchy for the toolkit."""


class DepthPoisonError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(DepthPoisonError, ValueError):
    """Invalid parameters or violated type invariants."""


class PlacementError(DepthPoisonError):
    """Trigger placement out of bounds or off the target object."""


class CompletionError(DepthPoisonError):
    """Depth completion cannot proceed (e.g. a region component has no
    valid boundary pixel)."""


class DatasetError(DepthPoisonError):
    """Broken dataset layout, index, or manifest."""


class EvaluationError(DepthPoisonError):
    """Metric computation impossible (e.g. zero valid pixels in scope)."""
