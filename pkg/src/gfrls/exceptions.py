"""Exception hierarchy shared by every module in the package."""

import numpy as np


class GFRLSError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(GFRLSError, np.linalg.LinAlgError):
    """A matrix required to be positive definite failed the Cholesky test."""


class DimensionMismatch(GFRLSError, ValueError):
    pass


class NotSymmetric(GFRLSError, ValueError):
    pass


class IllPosedForgetting(GFRLSError, np.linalg.LinAlgError):
    """The information matrix minus the forgetting matrix is not positive definite.

    When this happens the underlying least-squares cost has no unique
    minimizer, so the step is refused instead of producing garbage.
    """


class InvalidParameter(GFRLSError, ValueError):
    pass


class UnsupportedDimension(GFRLSError, ValueError):
    pass


class EmptySequence(GFRLSError, ValueError):
    pass


class EmptyTrajectory(GFRLSError, ValueError):
    pass


class MissingCondition(GFRLSError, ValueError):
    """A robustness or lemma computation needs a constant the profile lacks."""


class InsufficientData(GFRLSError, ValueError):
    pass


class ConfigError(GFRLSError, ValueError):
    pass


class SchemaError(GFRLSError, ValueError):
    """A trace file does not match the CSV schema; message names row and column."""
