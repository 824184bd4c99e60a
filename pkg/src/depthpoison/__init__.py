"""Object-level depth-dataset poisoning toolkit.

Builds poisoned monocular-depth training sets from synthetic road scenes:
a color trigger patch is calibrated through a simulated print/capture
channel, placed on the target object, the object's depth is removed and
the surrounding band re-synthesized by harmonic completion, and the
triggered image is pushed through perspective and weather augmentation.
A metrics module scores attack effectiveness and model functionality.
"""

__version__ = "0.1.0"

from .errors import (
    CompletionError,
    DatasetError,
    DepthPoisonError,
    PlacementError,
    ValidationError,
)

__all__ = [
    "__version__",
    "DepthPoisonError",
    "ValidationError",
    "PlacementError",
    "CompletionError",
    "DatasetError",
]
