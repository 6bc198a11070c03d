"""Exception hierarchy for the metric engine.

Two families matter to callers: :class:`ValidationError` covers contract
violations detectable from the inputs (bad shapes, missing files, out-of-range
parameters) and maps to CLI exit code 1; :class:`NumericalError` covers
failures that only surface during computation (broken covariance inputs,
degenerate feature sets) and maps to exit code 2.
"""

from __future__ import annotations


class FeatdistError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FeatdistError):
    """Input violates a documented precondition or file contract."""


class NumericalError(FeatdistError):
    """Computation failed or produced an out-of-contract value."""


# --- feature ingestion -------------------------------------------------

class MissingFile(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    """Array file header disagrees with its manifest (shape or dtype)."""


class FormatError(ValidationError):
    """Array file is not the supported NPY v1.0 little-endian 2-D layout."""


class NonFiniteValue(ValidationError):
    """A feature file contains NaN or Inf; carries the first offending row."""

    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


class DegenerateRow(NumericalError):
    """All-zero row cannot be L1/L2-normalized."""

    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


class SampleCountOutOfRange(ValidationError):
    pass


# --- Frechet metric ----------------------------------------------------

class InsufficientSamples(ValidationError):
    pass


class NotSymmetric(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NumericalFailure(NumericalError):
    """A result landed far enough outside its mathematical range to signal
    broken inputs rather than float noise."""


# --- kernels / CKA -----------------------------------------------------

class ZeroMedian(NumericalError):
    """All points identical; median-heuristic bandwidth undefined."""


class MissingBandwidth(ValidationError):
    """RBF Gram requested without an override or a shared bandwidth."""


class AlreadyCentered(ValidationError):
    pass


class CenteringMismatch(ValidationError):
    """HSIC requires both Grams centered or both uncentered."""


class SizeMismatch(ValidationError):
    pass


class DegenerateInput(NumericalError):
    """Constant features: self-HSIC is zero, similarity undefined."""


# --- aggregation / report ----------------------------------------------

class MixedMetrics(ValidationError):
    """FD values must never be averaged into an Overall score."""


class EmptyInput(ValidationError):
    pass


class SampleCountMismatch(ValidationError):
    pass


class ReportError(ValidationError):
    """Report JSON violates the fixed schema."""


# --- robustness harnesses ----------------------------------------------

class LabelOutOfRange(ValidationError):
    pass


class PoolTooSmall(ValidationError):
    pass


class SizeExceedsPool(ValidationError):
    pass


# --- recipes / CLI -----------------------------------------------------

class RecipeError(ValidationError):
    """Recipe file invalid or references unresolvable manifests."""
