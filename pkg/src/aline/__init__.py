"""Agreement-on-the-line toolkit.

Estimates OOD accuracy from unlabeled data via the agreement line between
model pairs, calibrates confidence by temperature root-finding against the
estimated accuracy, and selects models by ID accuracy.
"""

__version__ = "0.1.0"

from aline.bundle import ModelRecord, PredictionBundle, load_bundle, validate_bundle, write_bundle
from aline.errors import (
    AlineError,
    BundleFormatError,
    BundleInvariantError,
    DegenerateFitError,
    SolverError,
)
from aline.kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "AlineError",
    "BundleFormatError",
    "BundleInvariantError",
    "DegenerateFitError",
    "KERNEL_BACKEND",
    "ModelRecord",
    "PredictionBundle",
    "SolverError",
    "load_bundle",
    "validate_bundle",
    "write_bundle",
    "__version__",
]
